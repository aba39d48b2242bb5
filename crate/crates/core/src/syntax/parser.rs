use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::{Pos, SyntaxError};

const KEYWORDS: &[&str] = &[
    "package", "import", "class", "interface", "extends", "implements", "public", "private",
    "protected", "static", "final", "abstract", "return", "new", "this", "if", "else", "while",
    "void", "true", "false", "null",
];

const MODIFIERS: &[&str] = &["public", "private", "protected", "static", "final", "abstract"];

/// Parses a compilation unit that must hold exactly one top-level class.
pub fn parse_unit(text: &str) -> Result<SourceUnit, SyntaxError> {
    let mut units = parse_compilation(text)?;
    if units.len() != 1 {
        return Err(SyntaxError::ClassCount(units.len()));
    }
    Ok(units.remove(0))
}

/// Parses a compilation unit with any number of top-level classes. Each
/// class becomes its own `SourceUnit` sharing the package and imports.
pub fn parse_compilation(text: &str) -> Result<Vec<SourceUnit>, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, at: 0 };
    parser.compilation()
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn peek_at(&self, offset: usize) -> &TokenKind {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.at].clone();
        if self.at < self.tokens.len() - 1 {
            self.at += 1;
        }
        tok
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let tok = self.peek();
        Err(SyntaxError::Unexpected {
            pos: tok.pos,
            expected: expected.to_string(),
            found: tok.kind.to_string(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Pos> {
        if self.is_punct(p) {
            Ok(self.advance().pos)
        } else {
            self.error(&format!("`{}`", p))
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match &self.peek().kind {
            TokenKind::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                let pos = self.advance().pos;
                Ok((s, pos))
            }
            _ => self.error("identifier"),
        }
    }

    fn qualified_name(&mut self) -> PResult<String> {
        let (mut name, _) = self.ident()?;
        while self.is_punct(".") {
            if matches!(self.peek_at(1), TokenKind::Punct("*")) {
                self.advance();
                self.advance();
                name.push_str(".*");
                break;
            }
            self.advance();
            let (seg, _) = self.ident()?;
            name.push('.');
            name.push_str(&seg);
        }
        Ok(name)
    }

    fn compilation(&mut self) -> PResult<Vec<SourceUnit>> {
        let mut package_path = Vec::new();
        if self.eat_keyword("package") {
            let name = self.qualified_name()?;
            package_path = name.split('.').map(str::to_string).collect();
            self.expect_punct(";")?;
        }
        let mut imports = Vec::new();
        while self.eat_keyword("import") {
            self.eat_keyword("static");
            imports.push(self.qualified_name()?);
            self.expect_punct(";")?;
        }
        let mut units = Vec::new();
        while self.peek().kind != TokenKind::Eof {
            let class = self.class_decl()?;
            let declarations = collect_declarations(&class)?;
            let unit_name = if package_path.is_empty() {
                class.name.clone()
            } else {
                format!("{}.{}", package_path.join("."), class.name)
            };
            units.push(SourceUnit {
                unit_name,
                package_path: package_path.clone(),
                imports: imports.clone(),
                class,
                declarations,
            });
        }
        Ok(units)
    }

    fn modifiers(&mut self) -> Visibility {
        let mut vis = Visibility::Private;
        while let TokenKind::Ident(s) = &self.peek().kind {
            if !MODIFIERS.contains(&s.as_str()) {
                break;
            }
            if s == "public" {
                vis = Visibility::Public;
            }
            self.advance();
        }
        vis
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        let visibility = self.modifiers();
        if !self.eat_keyword("interface") {
            if !self.is_keyword("class") {
                return self.error("`class`");
            }
            self.advance();
        }
        let (name, pos) = self.ident()?;
        let mut supertypes = Vec::new();
        if self.eat_keyword("extends") {
            supertypes.push(self.type_name()?);
            while self.eat_punct(",") {
                supertypes.push(self.type_name()?);
            }
        }
        if self.eat_keyword("implements") {
            supertypes.push(self.type_name()?);
            while self.eat_punct(",") {
                supertypes.push(self.type_name()?);
            }
        }
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        while !self.is_punct("}") {
            if self.peek().kind == TokenKind::Eof {
                return self.error("`}`");
            }
            let member_vis = self.modifiers();
            // constructor: ClassName (
            if matches!(&self.peek().kind, TokenKind::Ident(s) if *s == name)
                && matches!(self.peek_at(1), TokenKind::Punct("("))
            {
                let (_, mpos) = self.ident()?;
                let params = self.params()?;
                let body = self.body()?;
                methods.push(MethodDecl {
                    name: name.clone(),
                    return_type: None,
                    visibility: member_vis,
                    params,
                    body,
                    pos: mpos,
                });
                continue;
            }
            let ty = if self.eat_keyword("void") { "void".to_string() } else { self.type_name()? };
            let (member, mpos) = self.ident()?;
            if self.is_punct("(") {
                let params = self.params()?;
                let body = if self.eat_punct(";") { Vec::new() } else { self.body()? };
                methods.push(MethodDecl {
                    name: member,
                    return_type: Some(ty),
                    visibility: member_vis,
                    params,
                    body,
                    pos: mpos,
                });
            } else if self.is_punct("=") || self.is_punct(";") {
                let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                self.expect_punct(";")?;
                fields.push(FieldDecl { name: member, ty, visibility: member_vis, init, pos: mpos });
            } else {
                return self.error("`(`, `=` or `;`");
            }
        }
        self.expect_punct("}")?;
        Ok(ClassDecl { name, visibility, supertypes, fields, methods, pos })
    }

    /// Type names are reduced to their simple name; generic arguments are
    /// erased and array dimensions kept as `[]` suffixes.
    fn type_name(&mut self) -> PResult<String> {
        let (mut name, _) = self.ident()?;
        while self.is_punct(".") && matches!(self.peek_at(1), TokenKind::Ident(_)) {
            self.advance();
            name = self.ident()?.0;
        }
        if self.eat_punct("<") {
            if !self.is_punct(">") {
                self.type_name()?;
                while self.eat_punct(",") {
                    self.type_name()?;
                }
            }
            self.expect_punct(">")?;
        }
        while self.is_punct("[") && matches!(self.peek_at(1), TokenKind::Punct("]")) {
            self.advance();
            self.advance();
            name.push_str("[]");
        }
        Ok(name)
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                self.eat_keyword("final");
                let ty = self.type_name()?;
                let (name, pos) = self.ident()?;
                params.push(Param { name, ty, pos });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    fn body(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        // `{ ... }` elides a body
        if self.eat_punct("...") {
            self.expect_punct("}")?;
            return Ok(Vec::new());
        }
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            if self.peek().kind == TokenKind::Eof {
                return self.error("`}`");
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt_block(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_punct("{") {
            self.body()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.is_punct("{") {
            return Ok(Stmt::Block(self.body()?));
        }
        if self.eat_punct(";") {
            return Ok(Stmt::Block(Vec::new()));
        }
        if self.eat_keyword("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then = self.stmt_block()?;
            let otherwise = if self.eat_keyword("else") { self.stmt_block()? } else { Vec::new() };
            return Ok(Stmt::If { cond, then, otherwise });
        }
        if self.eat_keyword("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.stmt_block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.is_keyword("return") {
            let pos = self.advance().pos;
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            return Ok(Stmt::Return { value, pos });
        }
        self.eat_keyword("final");
        if let Some(local) = self.try_local()? {
            return Ok(local);
        }
        let target = self.expr()?;
        let op = match &self.peek().kind {
            TokenKind::Punct("=") => Some(AssignOp::Set),
            TokenKind::Punct("+=") => Some(AssignOp::Add),
            TokenKind::Punct("-=") => Some(AssignOp::Sub),
            TokenKind::Punct("*=") => Some(AssignOp::Mul),
            TokenKind::Punct("/=") => Some(AssignOp::Div),
            TokenKind::Punct("%=") => Some(AssignOp::Rem),
            _ => None,
        };
        let stmt = match op {
            Some(op) => {
                let pos = self.advance().pos;
                if !matches!(target, Expr::Ident { .. } | Expr::Field { .. } | Expr::Index { .. }) {
                    return Err(SyntaxError::Unexpected {
                        pos,
                        expected: "assignable target".into(),
                        found: "expression".into(),
                    });
                }
                let value = self.expr()?;
                Stmt::Assign { target, op, value, pos }
            }
            None => Stmt::Expr(target),
        };
        self.expect_punct(";")?;
        Ok(stmt)
    }

    /// `Type name (= init)? ;` with backtracking when the prefix is not a type
    /// followed by an identifier.
    fn try_local(&mut self) -> PResult<Option<Stmt>> {
        if !matches!(&self.peek().kind, TokenKind::Ident(s) if !KEYWORDS.contains(&s.as_str())) {
            return Ok(None);
        }
        let save = self.at;
        let ty = match self.type_name() {
            Ok(ty) => ty,
            Err(_) => {
                self.at = save;
                return Ok(None);
            }
        };
        let (name, pos) = match self.ident() {
            Ok(found) => found,
            Err(_) => {
                self.at = save;
                return Ok(None);
            }
        };
        let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
        self.expect_punct(";")?;
        Ok(Some(Stmt::Local { ty, name, init, pos }))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[&str]] = &[
            &["||"],
            &["&&"],
            &["==", "!="],
            &["<", ">", "<=", ">="],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match &self.peek().kind {
                TokenKind::Punct(p) if LEVELS[level].contains(p) => *p,
                _ => break,
            };
            self.advance();
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        for op in ["-", "!", "+"] {
            if self.eat_punct(op) {
                let operand = self.unary()?;
                return Ok(Expr::Unary { op, operand: Box::new(operand) });
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.primary()?;
        loop {
            if self.eat_punct(".") {
                let (name, pos) = self.ident()?;
                if self.is_punct("(") {
                    let args = self.args()?;
                    expr = Expr::Call { receiver: Some(Box::new(expr)), name, args, pos };
                } else {
                    expr = Expr::Field { receiver: Box::new(expr), name, pos };
                }
            } else if self.eat_punct("[") {
                let index = self.expr()?;
                self.expect_punct("]")?;
                expr = Expr::Index { base: Box::new(expr), index: Box::new(index) };
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Int(v) => {
                self.advance();
                Ok(Expr::Literal(Literal::Int(*v)))
            }
            TokenKind::Float(v) => {
                self.advance();
                Ok(Expr::Literal(Literal::Float(*v)))
            }
            TokenKind::Str(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::Str(s.clone())))
            }
            TokenKind::Char(c) => {
                self.advance();
                Ok(Expr::Literal(Literal::Char(*c)))
            }
            TokenKind::Punct("(") => {
                self.advance();
                let inner = self.expr()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            TokenKind::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.advance();
                    Ok(Expr::Literal(Literal::Bool(s == "true")))
                }
                "null" => {
                    self.advance();
                    Ok(Expr::Literal(Literal::Null))
                }
                "this" => {
                    self.advance();
                    Ok(Expr::This(tok.pos))
                }
                "new" => {
                    self.advance();
                    let ty = self.type_name()?;
                    let args = self.args()?;
                    Ok(Expr::New { ty, args, pos: tok.pos })
                }
                _ => {
                    let (name, pos) = self.ident()?;
                    if self.is_punct("(") {
                        let args = self.args()?;
                        Ok(Expr::Call { receiver: None, name, args, pos })
                    } else {
                        Ok(Expr::Ident { name, pos })
                    }
                }
            },
            _ => self.error("expression"),
        }
    }
}

fn collect_declarations(class: &ClassDecl) -> PResult<Vec<Declaration>> {
    let mut decls = vec![Declaration {
        kind: DeclKind::Class,
        name: class.name.clone(),
        declared_type: class.name.clone(),
        visibility: class.visibility,
        scope: None,
        pos: class.pos,
    }];
    let mut field_names = HashSet::new();
    for f in &class.fields {
        if !field_names.insert(f.name.as_str()) {
            return Err(SyntaxError::Duplicate {
                pos: f.pos,
                name: f.name.clone(),
                scope: class.name.clone(),
            });
        }
        decls.push(Declaration {
            kind: DeclKind::Field,
            name: f.name.clone(),
            declared_type: f.ty.clone(),
            visibility: f.visibility,
            scope: None,
            pos: f.pos,
        });
    }
    let mut method_names = HashSet::new();
    for m in &class.methods {
        if !method_names.insert(m.name.as_str()) {
            return Err(SyntaxError::Duplicate {
                pos: m.pos,
                name: m.name.clone(),
                scope: class.name.clone(),
            });
        }
        decls.push(Declaration {
            kind: DeclKind::Method,
            name: m.name.clone(),
            declared_type: m.return_type.clone().unwrap_or_else(|| class.name.clone()),
            visibility: m.visibility,
            scope: None,
            pos: m.pos,
        });
        let mut local_names = HashSet::new();
        for p in &m.params {
            if !local_names.insert(p.name.clone()) {
                return Err(SyntaxError::Duplicate {
                    pos: p.pos,
                    name: p.name.clone(),
                    scope: m.name.clone(),
                });
            }
            decls.push(Declaration {
                kind: DeclKind::Parameter,
                name: p.name.clone(),
                declared_type: p.ty.clone(),
                visibility: Visibility::Private,
                scope: Some(m.name.clone()),
                pos: p.pos,
            });
        }
        collect_locals(&m.body, &m.name, &mut local_names, &mut decls)?;
    }
    Ok(decls)
}

fn collect_locals(
    stmts: &[Stmt],
    scope: &str,
    seen: &mut HashSet<String>,
    decls: &mut Vec<Declaration>,
) -> PResult<()> {
    for stmt in stmts {
        match stmt {
            Stmt::Local { ty, name, pos, .. } => {
                if !seen.insert(name.clone()) {
                    return Err(SyntaxError::Duplicate {
                        pos: *pos,
                        name: name.clone(),
                        scope: scope.to_string(),
                    });
                }
                decls.push(Declaration {
                    kind: DeclKind::Local,
                    name: name.clone(),
                    declared_type: ty.clone(),
                    visibility: Visibility::Private,
                    scope: Some(scope.to_string()),
                    pos: *pos,
                });
            }
            Stmt::If { then, otherwise, .. } => {
                collect_locals(then, scope, seen, decls)?;
                collect_locals(otherwise, scope, seen, decls)?;
            }
            Stmt::While { body, .. } | Stmt::Block(body) => collect_locals(body, scope, seen, decls)?,
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn employee_listing_shape() {
        let unit = parse_unit(fixtures::EMPLOYEE).unwrap();
        assert_eq!(unit.unit_name, "Employee");
        assert_eq!(unit.count_kind(DeclKind::Class), 1);
        assert_eq!(unit.count_kind(DeclKind::Field), 3);
        let ctors = unit.class.methods.iter().filter(|m| m.is_constructor()).count();
        assert_eq!(ctors, 1);
        assert_eq!(unit.class.methods.len() - ctors, 1);
        assert_eq!(unit.statement_count(), 6);
    }

    #[test]
    fn empty_class() {
        let unit = parse_unit("public class A {}").unwrap();
        assert_eq!(unit.count_kind(DeclKind::Class), 1);
        assert_eq!(unit.declarations.len(), 1);
        assert!(unit.class.fields.is_empty());
        assert!(unit.class.methods.is_empty());
        assert_eq!(unit.statement_count(), 0);
    }

    #[test]
    fn missing_semicolon_reports_next_token() {
        let err = parse_unit("class A {\n  int a boolean b\n}").unwrap_err();
        match err {
            SyntaxError::Unexpected { pos, found, .. } => {
                assert_eq!(found, "boolean");
                assert_eq!(pos, Pos { line: 2, col: 9 });
            }
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn duplicate_declarations_rejected() {
        let err = parse_unit("class A { int a; double a; }").unwrap_err();
        assert!(matches!(err, SyntaxError::Duplicate { ref name, .. } if name == "a"));
        let err = parse_unit("class A { void f(int x) { int x = 1; } }").unwrap_err();
        assert!(matches!(err, SyntaxError::Duplicate { ref scope, .. } if scope == "f"));
    }

    #[test]
    fn same_local_name_in_two_methods_is_fine() {
        let unit = parse_unit(fixtures::EMPLOYEE).unwrap();
        let temps: Vec<_> = unit.declarations.iter().filter(|d| d.name == "temp").collect();
        assert_eq!(temps.len(), 2);
        assert_eq!(temps[0].declared_type, "Date");
        assert_eq!(temps[1].declared_type, "double");
    }

    #[test]
    fn multi_class_compilation() {
        let units = parse_compilation(fixtures::VEHICLES).unwrap();
        let names: Vec<_> = units.iter().map(|u| u.unit_name.as_str()).collect();
        assert_eq!(names, ["Vehicle", "Car", "Employee"]);
        assert_eq!(units[1].class.supertypes, ["Vehicle"]);
        assert!(matches!(parse_unit(fixtures::VEHICLES), Err(SyntaxError::ClassCount(3))));
    }

    #[test]
    fn package_imports_and_generics() {
        let src = "package a.b;\nimport java.util.List;\nimport java.util.*;\n\
                   class C { List<String> xs; int[] n; void f() { List<String> ys = xs; if (a < b) { g(); } } }";
        let unit = parse_unit(src).unwrap();
        assert_eq!(unit.unit_name, "a.b.C");
        assert_eq!(unit.package_path, ["a", "b"]);
        assert_eq!(unit.imports, ["java.util.List", "java.util.*"]);
        assert_eq!(unit.class.fields[0].ty, "List");
        assert_eq!(unit.class.fields[1].ty, "int[]");
        match &unit.class.methods[0].body[0] {
            Stmt::Local { ty, name, .. } => assert_eq!((ty.as_str(), name.as_str()), ("List", "ys")),
            other => panic!("{:?}", other),
        }
        assert!(matches!(&unit.class.methods[0].body[1], Stmt::If { .. }));
    }

    #[test]
    fn precedence() {
        let unit = parse_unit("class A { void f() { x = a + b * c; } }").unwrap();
        match &unit.class.methods[0].body[0] {
            Stmt::Assign { value: Expr::Binary { op, rhs, .. }, .. } => {
                assert_eq!(*op, "+");
                assert!(matches!(**rhs, Expr::Binary { op: "*", .. }));
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(parse_unit(fixtures::EMPLOYEE), parse_unit(fixtures::EMPLOYEE));
    }
}
