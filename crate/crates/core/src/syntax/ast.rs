use serde::{Deserialize, Serialize};

use super::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Class,
    Field,
    Method,
    Parameter,
    Local,
}

/// A named declaration in a unit. `scope` names the enclosing method for
/// parameters and locals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Declaration {
    pub kind: DeclKind,
    pub name: String,
    pub declared_type: String,
    pub visibility: Visibility,
    pub scope: Option<String>,
    pub pos: Pos,
}

/// One parsed compilation unit holding a single top-level class.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    pub unit_name: String,
    pub package_path: Vec<String>,
    pub imports: Vec<String>,
    pub class: ClassDecl,
    pub declarations: Vec<Declaration>,
}

impl SourceUnit {
    pub fn count_kind(&self, kind: DeclKind) -> usize {
        self.declarations.iter().filter(|d| d.kind == kind).count()
    }

    /// Total number of statements across all method and constructor bodies.
    pub fn statement_count(&self) -> usize {
        fn count(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match s {
                    Stmt::If { then, otherwise, .. } => 1 + count(then) + count(otherwise),
                    Stmt::While { body, .. } | Stmt::Block(body) => 1 + count(body),
                    _ => 1,
                })
                .sum()
        }
        self.class.methods.iter().map(|m| count(&m.body)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub visibility: Visibility,
    pub supertypes: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: String,
    pub visibility: Visibility,
    pub init: Option<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub name: String,
    /// `None` for constructors.
    pub return_type: Option<String>,
    pub visibility: Visibility,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

impl MethodDecl {
    pub fn is_constructor(&self) -> bool {
        self.return_type.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Local { ty: String, name: String, init: Option<Expr>, pos: Pos },
    Assign { target: Expr, op: AssignOp, value: Expr, pos: Pos },
    Return { value: Option<Expr>, pos: Pos },
    Expr(Expr),
    If { cond: Expr, then: Vec<Stmt>, otherwise: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Block(Vec<Stmt>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Char(char),
    Bool(bool),
    Null,
}

impl Literal {
    pub fn type_name(&self) -> &'static str {
        match self {
            Literal::Int(_) => "int",
            Literal::Float(_) => "double",
            Literal::Str(_) => "String",
            Literal::Char(_) => "char",
            Literal::Bool(_) => "boolean",
            Literal::Null => crate::UNTYPED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Ident { name: String, pos: Pos },
    This(Pos),
    Literal(Literal),
    /// `receiver.name`
    Field { receiver: Box<Expr>, name: String, pos: Pos },
    /// `name(args)` or `receiver.name(args)`
    Call { receiver: Option<Box<Expr>>, name: String, args: Vec<Expr>, pos: Pos },
    New { ty: String, args: Vec<Expr>, pos: Pos },
    Binary { op: &'static str, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: &'static str, operand: Box<Expr> },
    Index { base: Box<Expr>, index: Box<Expr> },
}

impl Expr {
    pub fn is_operator(&self) -> bool {
        matches!(self, Expr::Binary { .. } | Expr::Unary { .. })
    }
}
