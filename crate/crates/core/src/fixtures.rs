//! Small source fixtures bundled with the crate.

/// A class with a constructor and one method whose local `temp` takes two
/// different types.
pub const EMPLOYEE: &str = include_str!("../fixtures/employee.mj");

/// `Vehicle`, its subclass `Car`, and an `Employee` owning a `Car`.
pub const VEHICLES: &str = include_str!("../fixtures/vehicles.mj");

/// Library facts for the JDK types the fixtures use.
pub const JDK: &str = include_str!("../fixtures/jdk.json");

/// Twenty-five classes in five packages, one source text per package.
pub const CORPUS: [(&str, &str); 5] = [
    ("payroll.mj", include_str!("../fixtures/corpus/payroll.mj")),
    ("service.mj", include_str!("../fixtures/corpus/service.mj")),
    ("staff.mj", include_str!("../fixtures/corpus/staff.mj")),
    ("ui.mj", include_str!("../fixtures/corpus/ui.mj")),
    ("vehicles.mj", include_str!("../fixtures/corpus/vehicles.mj")),
];

/// Parsed fixture corpus with its library facts.
pub fn corpus_inputs() -> crate::pipeline::Inputs {
    let mut units = Vec::new();
    for (name, text) in CORPUS {
        let parsed = crate::syntax::parse_compilation(text)
            .unwrap_or_else(|e| panic!("fixture {} does not parse: {}", name, e));
        units.extend(parsed);
    }
    let libs = crate::facts::LibraryFacts::from_json(JDK).expect("fixture library facts parse");
    crate::pipeline::Inputs::from_sources(units, libs)
}
