//! Uniform per-unit facts: typed identifier occurrences, public API members
//! and supertype edges. Every downstream model reads these, whether they were
//! extracted from mini-language sources or loaded from a facts file.
//!
//! Occurrences are counted inside executable statements of constructors and
//! methods only. A local declaration with an initializer counts its declared
//! name once, `this.x` counts `x`, and bare field declarations and formal
//! parameter lists count nothing. Each occurrence carries the static type of
//! the identifier at its use site; unresolved names get [`UNTYPED`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{ClassDecl, Expr, SourceUnit, Stmt, Visibility};
use crate::UNTYPED;

/// Types every unit can name without an import.
pub const BUILTIN_TYPES: &[&str] = &[
    "boolean", "byte", "char", "short", "int", "long", "float", "double", "void", "String",
    "Object",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occurrence {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberKind {
    #[default]
    Field,
    Method,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ApiMember {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub owner: String,
    #[serde(default)]
    pub kind: MemberKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SupertypeEdge {
    pub sub: String,
    #[serde(rename = "super")]
    pub sup: String,
}

/// Extra supervised relation between two network nodes. Accepted on input,
/// ignored unless the network is built with supervision enabled.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub source: String,
    pub target: String,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitFacts {
    pub unit: String,
    pub package: Vec<String>,
    pub imports: Vec<String>,
    pub occurrences: Vec<Occurrence>,
    pub api: Vec<ApiMember>,
    pub supertypes: Vec<SupertypeEdge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<Relation>,
}

impl UnitFacts {
    /// Simple (unqualified) class name of the unit.
    pub fn simple_name(&self) -> &str {
        self.unit.rsplit('.').next().unwrap_or(&self.unit)
    }

    pub fn total_occurrences(&self) -> u64 {
        self.occurrences.iter().map(|o| o.count).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusFacts {
    pub units: Vec<UnitFacts>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryMember {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryType {
    pub name: String,
    #[serde(default)]
    pub supertypes: Vec<String>,
    #[serde(default)]
    pub members: Vec<LibraryMember>,
}

impl LibraryType {
    pub fn simple_name(&self) -> &str {
        simple_name(&self.name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryFacts {
    pub types: Vec<LibraryType>,
}

#[derive(Debug, Error)]
pub enum FactsError {
    #[error("record {record}: {message}")]
    Schema { record: String, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("library facts: {0}")]
    Library(serde_json::Error),
}

fn schema(record: impl Into<String>, message: impl Into<String>) -> FactsError {
    FactsError::Schema { record: record.into(), message: message.into() }
}

pub fn simple_name(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

/// Member and supertype information used to type access paths and calls.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    types: HashMap<String, TypeInfo>,
}

#[derive(Debug, Clone, Default)]
struct TypeInfo {
    supertypes: Vec<String>,
    fields: HashMap<String, String>,
    methods: HashMap<String, String>,
}

impl TypeEnv {
    pub fn from_units<'a>(units: impl IntoIterator<Item = &'a SourceUnit>) -> Self {
        let mut env = TypeEnv::default();
        for unit in units {
            env.add_class(&unit.class);
        }
        env
    }

    pub fn add_class(&mut self, class: &ClassDecl) {
        let info = self.types.entry(class.name.clone()).or_default();
        info.supertypes.extend(class.supertypes.iter().cloned());
        for f in &class.fields {
            info.fields.insert(f.name.clone(), f.ty.clone());
        }
        for m in &class.methods {
            let ret = m.return_type.clone().unwrap_or_else(|| class.name.clone());
            info.methods.insert(m.name.clone(), ret);
        }
    }

    pub fn add_library(&mut self, libs: &LibraryFacts) {
        for t in &libs.types {
            let info = self.types.entry(t.simple_name().to_string()).or_default();
            info.supertypes.extend(t.supertypes.iter().map(|s| simple_name(s).to_string()));
            for m in &t.members {
                info.fields.entry(m.name.clone()).or_insert_with(|| m.ty.clone());
                info.methods.entry(m.name.clone()).or_insert_with(|| m.ty.clone());
            }
        }
    }

    pub fn knows(&self, ty: &str) -> bool {
        self.types.contains_key(ty)
    }

    fn lookup(&self, ty: &str, name: &str, method: bool) -> Option<&str> {
        let mut queue = VecDeque::from([ty]);
        let mut seen = HashSet::new();
        while let Some(t) = queue.pop_front() {
            if !seen.insert(t) {
                continue;
            }
            if let Some(info) = self.types.get(t) {
                let table = if method { &info.methods } else { &info.fields };
                if let Some(found) = table.get(name) {
                    return Some(found);
                }
                queue.extend(info.supertypes.iter().map(String::as_str));
            }
        }
        None
    }

    pub fn field_type(&self, ty: &str, name: &str) -> Option<&str> {
        self.lookup(ty, name, false)
    }

    pub fn method_type(&self, ty: &str, name: &str) -> Option<&str> {
        self.lookup(ty, name, true)
    }
}

/// Extracts facts using only the unit's own declarations for typing.
pub fn extract_facts(unit: &SourceUnit) -> UnitFacts {
    extract_facts_with(unit, &TypeEnv::from_units([unit]))
}

pub fn extract_facts_with(unit: &SourceUnit, env: &TypeEnv) -> UnitFacts {
    let mut counter = Counter { env, class: &unit.class, scope: HashMap::new(), counts: BTreeMap::new() };
    for method in &unit.class.methods {
        counter.scope.clear();
        for p in &method.params {
            counter.scope.insert(p.name.clone(), p.ty.clone());
        }
        declare_locals(&method.body, &mut counter.scope);
        for stmt in &method.body {
            counter.stmt(stmt);
        }
    }
    let occurrences = counter
        .counts
        .into_iter()
        .map(|((id, ty), count)| Occurrence { id, ty, count })
        .collect();
    let supertypes = unit
        .class
        .supertypes
        .iter()
        .map(|s| SupertypeEdge { sub: unit.class.name.clone(), sup: s.clone() })
        .collect();
    UnitFacts {
        unit: unit.unit_name.clone(),
        package: unit.package_path.clone(),
        imports: unit.imports.clone(),
        occurrences,
        api: extract_api(unit),
        supertypes,
        relations: Vec::new(),
    }
}

/// Extracts facts for a whole corpus, typing member accesses across units and
/// library types.
pub fn extract_corpus(units: &[SourceUnit], libs: &LibraryFacts) -> CorpusFacts {
    let mut env = TypeEnv::from_units(units);
    env.add_library(libs);
    CorpusFacts { units: units.iter().map(|u| extract_facts_with(u, &env)).collect() }
}

/// Public fields and non-constructor methods of the unit's class.
pub fn extract_api(unit: &SourceUnit) -> Vec<ApiMember> {
    let class = &unit.class;
    let fields = class.fields.iter().filter(|f| f.visibility == Visibility::Public).map(|f| {
        ApiMember {
            name: f.name.clone(),
            ty: f.ty.clone(),
            owner: class.name.clone(),
            kind: MemberKind::Field,
        }
    });
    let methods = class
        .methods
        .iter()
        .filter(|m| m.visibility == Visibility::Public && !m.is_constructor())
        .map(|m| ApiMember {
            name: m.name.clone(),
            ty: m.return_type.clone().unwrap_or_default(),
            owner: class.name.clone(),
            kind: MemberKind::Method,
        });
    fields.chain(methods).collect()
}

fn declare_locals(stmts: &[Stmt], scope: &mut HashMap<String, String>) {
    for stmt in stmts {
        match stmt {
            Stmt::Local { ty, name, .. } => {
                scope.insert(name.clone(), ty.clone());
            }
            Stmt::If { then, otherwise, .. } => {
                declare_locals(then, scope);
                declare_locals(otherwise, scope);
            }
            Stmt::While { body, .. } | Stmt::Block(body) => declare_locals(body, scope),
            _ => {}
        }
    }
}

struct Counter<'a> {
    env: &'a TypeEnv,
    class: &'a ClassDecl,
    scope: HashMap<String, String>,
    counts: BTreeMap<(String, String), u64>,
}

impl Counter<'_> {
    fn add(&mut self, id: &str, ty: String) {
        *self.counts.entry((id.to_string(), ty)).or_insert(0) += 1;
    }

    fn stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Local { ty, name, init, .. } => {
                if let Some(init) = init {
                    self.add(name, ty.clone());
                    self.expr(init);
                }
            }
            Stmt::Assign { target, value, .. } => {
                self.expr(target);
                self.expr(value);
            }
            Stmt::Return { value, .. } => {
                if let Some(v) = value {
                    self.expr(v);
                }
            }
            Stmt::Expr(e) => self.expr(e),
            Stmt::If { cond, then, otherwise } => {
                self.expr(cond);
                then.iter().for_each(|s| self.stmt(s));
                otherwise.iter().for_each(|s| self.stmt(s));
            }
            Stmt::While { cond, body } => {
                self.expr(cond);
                body.iter().for_each(|s| self.stmt(s));
            }
            Stmt::Block(body) => body.iter().for_each(|s| self.stmt(s)),
        }
    }

    fn expr(&mut self, expr: &Expr) {
        match expr {
            Expr::Ident { name, .. } => {
                let ty = self.type_of(expr);
                self.add(name, ty);
            }
            Expr::This(_) | Expr::Literal(_) => {}
            Expr::Field { receiver, name, .. } => {
                self.expr(receiver);
                let ty = self.type_of(expr);
                self.add(name, ty);
            }
            Expr::Call { receiver, name, args, .. } => {
                if let Some(r) = receiver {
                    self.expr(r);
                }
                let ty = self.type_of(expr);
                self.add(name, ty);
                args.iter().for_each(|a| self.expr(a));
            }
            Expr::New { args, .. } => args.iter().for_each(|a| self.expr(a)),
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            Expr::Unary { operand, .. } => self.expr(operand),
            Expr::Index { base, index } => {
                self.expr(base);
                self.expr(index);
            }
        }
    }

    fn type_of(&self, expr: &Expr) -> String {
        static_type(expr, self.env, self.class, &self.scope)
    }
}

/// Static type of an expression in the given method scope; [`UNTYPED`] when
/// it cannot be resolved.
pub fn static_type(
    expr: &Expr,
    env: &TypeEnv,
    class: &ClassDecl,
    scope: &HashMap<String, String>,
) -> String {
    let untyped = || UNTYPED.to_string();
    match expr {
        Expr::Ident { name, .. } => {
            if let Some(ty) = scope.get(name) {
                ty.clone()
            } else if let Some(ty) = env.field_type(&class.name, name) {
                ty.to_string()
            } else if env.knows(name) {
                // a class name used as a static receiver
                name.clone()
            } else {
                untyped()
            }
        }
        Expr::This(_) => class.name.clone(),
        Expr::Literal(lit) => lit.type_name().to_string(),
        Expr::Field { receiver, name, .. } => {
            let recv = static_type(receiver, env, class, scope);
            env.field_type(&recv, name).map(str::to_string).unwrap_or_else(untyped)
        }
        Expr::Call { receiver, name, .. } => {
            let recv = match receiver {
                Some(r) => static_type(r, env, class, scope),
                None => class.name.clone(),
            };
            env.method_type(&recv, name).map(str::to_string).unwrap_or_else(untyped)
        }
        Expr::New { ty, .. } => ty.clone(),
        Expr::Binary { op, lhs, rhs } => match *op {
            "==" | "!=" | "<" | ">" | "<=" | ">=" | "&&" | "||" => "boolean".into(),
            _ => {
                let l = static_type(lhs, env, class, scope);
                let r = static_type(rhs, env, class, scope);
                numeric_promotion(op, &l, &r).unwrap_or_else(untyped)
            }
        },
        Expr::Unary { op, operand } => {
            if *op == "!" {
                "boolean".into()
            } else {
                static_type(operand, env, class, scope)
            }
        }
        Expr::Index { base, .. } => {
            let b = static_type(base, env, class, scope);
            b.strip_suffix("[]").map(str::to_string).unwrap_or_else(untyped)
        }
    }
}

fn numeric_promotion(op: &str, l: &str, r: &str) -> Option<String> {
    const RANK: &[&str] = &["byte", "short", "char", "int", "long", "float", "double"];
    if op == "+" && (l == "String" || r == "String") {
        return Some("String".into());
    }
    let rl = RANK.iter().position(|t| *t == l)?;
    let rr = RANK.iter().position(|t| *t == r)?;
    Some(RANK[rl.max(rr).max(3)].to_string())
}

#[derive(Deserialize)]
struct RawOccurrence {
    id: String,
    #[serde(rename = "type")]
    ty: String,
    count: i64,
}

#[derive(Deserialize)]
struct RawUnit {
    unit: String,
    package: Vec<String>,
    imports: Vec<String>,
    occurrences: Vec<RawOccurrence>,
    api: Vec<ApiMember>,
    supertypes: Vec<SupertypeEdge>,
    #[serde(default)]
    relations: Vec<Relation>,
}

impl CorpusFacts {
    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, name: &str) -> Option<&UnitFacts> {
        self.units.iter().find(|u| u.unit == name)
    }

    /// One JSON document per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for unit in &self.units {
            out.push_str(&serde_json::to_string(unit).expect("facts serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, FactsError> {
        let mut units: Vec<UnitFacts> = Vec::new();
        let mut names = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_tag = format!("line {}", lineno + 1);
            let raw: RawUnit =
                serde_json::from_str(line).map_err(|e| schema(line_tag.clone(), e.to_string()))?;
            let record = format!("{} (unit `{}`)", line_tag, raw.unit);
            if raw.unit.trim().is_empty() {
                return Err(schema(line_tag, "empty unit name"));
            }
            if !names.insert(raw.unit.clone()) {
                return Err(schema(record, "duplicate unit"));
            }
            if raw.package.iter().any(|s| s.is_empty()) {
                return Err(schema(record, "empty package segment"));
            }
            let mut seen = HashSet::new();
            let mut occurrences = Vec::with_capacity(raw.occurrences.len());
            for o in raw.occurrences {
                if o.count <= 0 {
                    return Err(schema(
                        record,
                        format!("occurrence ({}, {}) has non-positive count {}", o.id, o.ty, o.count),
                    ));
                }
                if o.id.is_empty() || o.ty.is_empty() {
                    return Err(schema(record, "occurrence with empty identifier or type"));
                }
                if !seen.insert((o.id.clone(), o.ty.clone())) {
                    return Err(schema(record, format!("duplicate occurrence ({}, {})", o.id, o.ty)));
                }
                occurrences.push(Occurrence { id: o.id, ty: o.ty, count: o.count as u64 });
            }
            units.push(UnitFacts {
                unit: raw.unit,
                package: raw.package,
                imports: raw.imports,
                occurrences,
                api: raw.api,
                supertypes: raw.supertypes,
                relations: raw.relations,
            });
        }
        Ok(CorpusFacts { units })
    }

    /// Declared types in occurrences that resolve to nothing known: not a
    /// unit, an API owner, a library type, a builtin or the untyped sentinel.
    pub fn unresolved_types(&self, libs: &LibraryFacts) -> BTreeSet<String> {
        let mut known: HashSet<&str> = BUILTIN_TYPES.iter().copied().collect();
        known.insert(UNTYPED);
        for u in &self.units {
            known.insert(u.simple_name());
            known.extend(u.api.iter().map(|a| a.owner.as_str()));
        }
        known.extend(libs.types.iter().map(|t| t.simple_name()));
        self.units
            .iter()
            .flat_map(|u| u.occurrences.iter())
            .filter(|o| !known.contains(o.ty.trim_end_matches("[]")))
            .map(|o| o.ty.clone())
            .collect()
    }
}

pub fn load_facts(path: impl AsRef<Path>) -> Result<CorpusFacts, FactsError> {
    CorpusFacts::from_jsonl(&fs::read_to_string(path)?)
}

impl LibraryFacts {
    pub fn from_json(text: &str) -> Result<Self, FactsError> {
        let libs: LibraryFacts = serde_json::from_str(text).map_err(FactsError::Library)?;
        for t in &libs.types {
            if t.name.is_empty() {
                return Err(schema("library", "type with empty name"));
            }
        }
        Ok(libs)
    }

    pub fn get(&self, simple: &str) -> Option<&LibraryType> {
        self.types.iter().find(|t| t.simple_name() == simple)
    }
}

pub fn load_library(path: impl AsRef<Path>) -> Result<LibraryFacts, FactsError> {
    LibraryFacts::from_json(&fs::read_to_string(path)?)
}
