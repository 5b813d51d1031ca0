//! Miniature HDL: lexer, parser, lint rules and an elaborated design model.
//!
//! A design is a single module with sized ports, registers and wires, a body
//! of clocked statements and a list of covergroups. The grammar is small on
//! purpose: coverage of every design can be computed exactly.
//!
//! ```text
//! module toy1 (input a[1], output y[1]);
//!   reg s[1] = 0;
//!   if (a == 1) { next s = 1; } else { next s = 0; }
//!   assign y = s;
//!   cover y { zero: 0..0, one: 1..1 }
//! endmodule
//! ```

mod lexer;
mod lint;
mod parser;
mod pretty;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use lint::{lint, LintIssue, LintKind};
pub use parser::{parse, ParseError, ParseErrorKind};
pub use pretty::pretty_print;

/// Largest width accepted for any port, register or wire.
pub const MAX_WIDTH: u32 = 16;

/// 1-based source position.
///
/// Locations never participate in structural equality, so two designs that
/// differ only in layout compare equal.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Loc {
    pub line: u32,
    pub column: u32,
}

impl Loc {
    pub fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }

    pub(crate) fn key(self) -> (u32, u32) {
        (self.line, self.column)
    }
}

impl PartialEq for Loc {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Loc {}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reg {
    pub name: String,
    pub width: u32,
    pub init: u64,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wire {
    pub name: String,
    pub width: u32,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    /// Bitwise complement `~`.
    Not,
    /// Logical negation `!`.
    LogicalNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    Xor,
    And,
    Eq,
    Ne,
    Lt,
    Gt,
    Shl,
    Shr,
    Add,
    Sub,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "|",
            BinaryOp::Xor => "^",
            BinaryOp::And => "&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 0,
            BinaryOp::Xor => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Gt => 3,
            BinaryOp::Shl | BinaryOp::Shr => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Ident { name: String, loc: Loc },
    Const(u64),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Calls `visit` for every identifier referenced by the expression, left to right.
    pub fn for_each_ident<'a>(&'a self, visit: &mut impl FnMut(&'a str, Loc)) {
        match self {
            Expr::Ident { name, loc } => visit(name, *loc),
            Expr::Const(_) => {}
            Expr::Unary(_, inner) => inner.for_each_ident(visit),
            Expr::Binary(_, lhs, rhs) => {
                lhs.for_each_ident(visit);
                rhs.for_each_ident(visit);
            }
        }
    }
}

/// Body statement. `id` fields number assign/next statements and conditionals
/// separately, in source (pre-order) order, starting at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign {
        target: String,
        expr: Expr,
        id: usize,
        loc: Loc,
    },
    Next {
        target: String,
        expr: Expr,
        id: usize,
        loc: Loc,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
        id: usize,
        loc: Loc,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub name: String,
    pub lo: u64,
    pub hi: u64,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Covergroup {
    pub signal: String,
    pub bins: Vec<Bin>,
    pub loc: Loc,
}

/// An elaborated design under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DutModel {
    pub name: String,
    pub loc: Loc,
    pub ports: Vec<Port>,
    pub regs: Vec<Reg>,
    pub wires: Vec<Wire>,
    pub body: Vec<Stmt>,
    pub covergroups: Vec<Covergroup>,
}

fn walk_stmts<'a>(body: &'a [Stmt], visit: &mut impl FnMut(&'a Stmt)) {
    for stmt in body {
        visit(stmt);
        if let Stmt::If {
            then_body,
            else_body,
            ..
        } = stmt
        {
            walk_stmts(then_body, visit);
            if let Some(else_body) = else_body {
                walk_stmts(else_body, visit);
            }
        }
    }
}

impl DutModel {
    /// Visits every statement in pre-order (source order).
    pub fn for_each_stmt<'a>(&'a self, mut visit: impl FnMut(&'a Stmt)) {
        walk_stmts(&self.body, &mut visit);
    }

    /// Number of `assign` and `next` statements.
    pub fn total_statements(&self) -> usize {
        let mut n = 0;
        self.for_each_stmt(|s| {
            if !matches!(s, Stmt::If { .. }) {
                n += 1;
            }
        });
        n
    }

    pub fn num_conditionals(&self) -> usize {
        let mut n = 0;
        self.for_each_stmt(|s| {
            if matches!(s, Stmt::If { .. }) {
                n += 1;
            }
        });
        n
    }

    /// Two outcomes per conditional, with or without an `else` arm.
    pub fn total_branch_outcomes(&self) -> usize {
        2 * self.num_conditionals()
    }

    pub fn total_bins(&self) -> usize {
        self.covergroups.iter().map(|c| c.bins.len()).sum()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Port> {
        self.ports
            .iter()
            .filter(|p| p.direction == Direction::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Port> {
        self.ports
            .iter()
            .filter(|p| p.direction == Direction::Output)
    }

    /// Sum of input port widths.
    pub fn input_width(&self) -> u32 {
        self.inputs().map(|p| p.width).sum()
    }

    /// Width of a declared signal, if any.
    pub fn signal_width(&self, name: &str) -> Option<u32> {
        self.ports
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.width)
            .or_else(|| self.regs.iter().find(|r| r.name == name).map(|r| r.width))
            .or_else(|| self.wires.iter().find(|w| w.name == name).map(|w| w.width))
    }
}
