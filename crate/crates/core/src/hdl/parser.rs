use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Token, TokenKind};
use super::{
    Bin, BinaryOp, Covergroup, Direction, DutModel, Expr, Loc, Port, Reg, Stmt, UnaryOp, Wire,
};

/// Nesting limit for expressions and conditional blocks.
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    Lex,
    Syntax,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{line}:{column}: {} error: {message}", match .kind { ParseErrorKind::Lex => "lex", ParseErrorKind::Syntax => "syntax" })]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub kind: ParseErrorKind,
    pub message: String,
}

/// Parses a design. Lint rules are not applied here; see [`super::lint`].
pub fn parse(text: &str) -> Result<DutModel, ParseError> {
    let tokens = tokenize(text)?;
    Parser {
        tokens,
        pos: 0,
        depth: 0,
        next_stmt: 0,
        next_branch: 0,
    }
    .design()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    next_stmt: usize,
    next_branch: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::Eof {
            self.pos += 1;
        }
        tok
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let tok = self.peek();
        ParseError {
            line: tok.loc.line,
            column: tok.loc.column,
            kind: ParseErrorKind::Syntax,
            message: format!("{}, found {}", message.into(), tok.kind.describe()),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> PResult<Loc> {
        if self.peek().kind == kind {
            Ok(self.advance().loc)
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn ident(&mut self) -> PResult<(String, Loc)> {
        match &self.peek().kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                Ok((name, self.advance().loc))
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    fn int(&mut self) -> PResult<u64> {
        match self.peek().kind {
            TokenKind::Int(v) => {
                self.advance();
                Ok(v)
            }
            _ => Err(self.error_here("expected integer")),
        }
    }

    fn width(&mut self) -> PResult<u32> {
        self.expect(TokenKind::LBracket, "`[`")?;
        let w = self.int()?;
        self.expect(TokenKind::RBracket, "`]`")?;
        Ok(u32::try_from(w).unwrap_or(u32::MAX))
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error_here("nesting too deep"));
        }
        Ok(())
    }

    fn design(mut self) -> PResult<DutModel> {
        self.expect(TokenKind::Module, "`module`")?;
        let (name, loc) = self.ident()?;
        self.expect(TokenKind::LParen, "`(`")?;
        let mut ports = vec![self.port()?];
        while self.peek().kind == TokenKind::Comma {
            self.advance();
            ports.push(self.port()?);
        }
        self.expect(TokenKind::RParen, "`)` or `,`")?;
        self.expect(TokenKind::Semi, "`;`")?;

        let mut dut = DutModel {
            name,
            loc,
            ports,
            regs: Vec::new(),
            wires: Vec::new(),
            body: Vec::new(),
            covergroups: Vec::new(),
        };
        loop {
            match self.peek().kind {
                TokenKind::EndModule => {
                    self.advance();
                    break;
                }
                TokenKind::Reg => {
                    self.advance();
                    let (name, loc) = self.ident()?;
                    let width = self.width()?;
                    self.expect(TokenKind::Assign1, "`=`")?;
                    let init = self.int()?;
                    self.expect(TokenKind::Semi, "`;`")?;
                    dut.regs.push(Reg {
                        name,
                        width,
                        init,
                        loc,
                    });
                }
                TokenKind::Wire => {
                    self.advance();
                    let (name, loc) = self.ident()?;
                    let width = self.width()?;
                    self.expect(TokenKind::Semi, "`;`")?;
                    dut.wires.push(Wire { name, width, loc });
                }
                TokenKind::Cover => dut.covergroups.push(self.cover()?),
                TokenKind::Assign | TokenKind::Next | TokenKind::If => {
                    let stmt = self.stmt()?;
                    dut.body.push(stmt);
                }
                _ => return Err(self.error_here("expected item or `endmodule`")),
            }
        }
        if self.peek().kind != TokenKind::Eof {
            return Err(self.error_here("expected end of input after `endmodule`"));
        }
        Ok(dut)
    }

    fn port(&mut self) -> PResult<Port> {
        let direction = match self.peek().kind {
            TokenKind::Input => Direction::Input,
            TokenKind::Output => Direction::Output,
            _ => return Err(self.error_here("expected `input` or `output`")),
        };
        self.advance();
        let (name, loc) = self.ident()?;
        let width = self.width()?;
        Ok(Port {
            name,
            direction,
            width,
            loc,
        })
    }

    fn cover(&mut self) -> PResult<Covergroup> {
        let loc = self.expect(TokenKind::Cover, "`cover`")?;
        let (signal, _) = self.ident()?;
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut bins = vec![self.bin()?];
        while self.peek().kind == TokenKind::Comma {
            self.advance();
            bins.push(self.bin()?);
        }
        self.expect(TokenKind::RBrace, "`}` or `,`")?;
        Ok(Covergroup { signal, bins, loc })
    }

    fn bin(&mut self) -> PResult<Bin> {
        let (name, loc) = self.ident()?;
        self.expect(TokenKind::Colon, "`:`")?;
        let lo = self.int()?;
        self.expect(TokenKind::DotDot, "`..`")?;
        let hi = self.int()?;
        Ok(Bin { name, lo, hi, loc })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut body = Vec::new();
        while self.peek().kind != TokenKind::RBrace {
            body.push(self.stmt()?);
        }
        self.advance();
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Assign | TokenKind::Next => {
                self.advance();
                let (target, _) = self.ident()?;
                self.expect(TokenKind::Assign1, "`=`")?;
                let expr = self.expr()?;
                self.expect(TokenKind::Semi, "`;`")?;
                let id = self.next_stmt;
                self.next_stmt += 1;
                Ok(if tok.kind == TokenKind::Assign {
                    Stmt::Assign {
                        target,
                        expr,
                        id,
                        loc: tok.loc,
                    }
                } else {
                    Stmt::Next {
                        target,
                        expr,
                        id,
                        loc: tok.loc,
                    }
                })
            }
            TokenKind::If => {
                self.advance();
                self.enter()?;
                // Pre-order numbering: the conditional takes its id before its arms.
                let id = self.next_branch;
                self.next_branch += 1;
                self.expect(TokenKind::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen, "`)`")?;
                let then_body = self.block()?;
                let else_body = if self.peek().kind == TokenKind::Else {
                    self.advance();
                    Some(self.block()?)
                } else {
                    None
                };
                self.depth -= 1;
                Ok(Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    id,
                    loc: tok.loc,
                })
            }
            _ => Err(self.error_here("expected `assign`, `next` or `if`")),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek().kind {
            TokenKind::Pipe => BinaryOp::Or,
            TokenKind::Caret => BinaryOp::Xor,
            TokenKind::Amp => BinaryOp::And,
            TokenKind::EqEq => BinaryOp::Eq,
            TokenKind::NotEq => BinaryOp::Ne,
            TokenKind::Lt => BinaryOp::Lt,
            TokenKind::Gt => BinaryOp::Gt,
            TokenKind::Shl => BinaryOp::Shl,
            TokenKind::Shr => BinaryOp::Shr,
            TokenKind::Plus => BinaryOp::Add,
            TokenKind::Minus => BinaryOp::Sub,
            _ => return None,
        })
    }

    /// Left-associative binary operators at or above `min_prec`.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        if min_prec > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(min_prec + 1)?;
        while let Some(op) = self.binary_op().filter(|op| op.precedence() == min_prec) {
            self.advance();
            let rhs = self.binary(min_prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek().kind {
            TokenKind::Tilde => UnaryOp::Not,
            TokenKind::Bang => UnaryOp::LogicalNot,
            _ => return self.primary(),
        };
        self.advance();
        self.enter()?;
        let inner = self.unary()?;
        self.depth -= 1;
        Ok(Expr::Unary(op, Box::new(inner)))
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().kind.clone() {
            TokenKind::Ident(name) => {
                let loc = self.advance().loc;
                Ok(Expr::Ident { name, loc })
            }
            TokenKind::Int(v) => {
                self.advance();
                Ok(Expr::Const(v))
            }
            TokenKind::LParen => {
                self.advance();
                self.enter()?;
                let inner = self.expr()?;
                self.depth -= 1;
                self.expect(TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.error_here("expected expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TOY1;

    #[test]
    fn toy1_counts() {
        let dut = parse(TOY1).unwrap();
        assert_eq!(dut.name, "toy1");
        assert_eq!(dut.total_statements(), 3);
        assert_eq!(dut.total_branch_outcomes(), 2);
        assert_eq!(dut.total_bins(), 2);
    }

    #[test]
    fn minimal_design() {
        let dut = parse("module m (input a[1], output y[1]); assign y = a; endmodule").unwrap();
        assert_eq!(dut.total_statements(), 1);
        assert_eq!(dut.total_branch_outcomes(), 0);
        assert_eq!(dut.total_bins(), 0);
    }

    #[test]
    fn missing_semicolon_reports_endmodule() {
        let src = "module m (input a[1], output y[1]); assign y = a endmodule";
        let err = parse(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.line, 1);
        assert_eq!(err.column as usize, src.find("endmodule").unwrap() + 1);
    }

    #[test]
    fn precedence_climbs() {
        let dut =
            parse("module m (input a[4], output y[4]); assign y = a | 1 + 2 << 1 == 6; endmodule")
                .unwrap();
        let Stmt::Assign { expr, .. } = &dut.body[0] else {
            panic!()
        };
        // a | (((1 + 2) << 1) == 6)
        let Expr::Binary(BinaryOp::Or, _, rhs) = expr else {
            panic!("{expr:?}")
        };
        let Expr::Binary(BinaryOp::Eq, lhs, _) = rhs.as_ref() else {
            panic!()
        };
        assert!(matches!(lhs.as_ref(), Expr::Binary(BinaryOp::Shl, _, _)));
    }

    #[test]
    fn ids_follow_preorder() {
        let src = "module m (input a[1], output y[1]);
            if (a) { assign y = 1; if (!a) { assign y = 0; } } else { assign y = 1; }
            assign y = a;
            endmodule";
        let dut = parse(src).unwrap();
        let mut stmt_ids = Vec::new();
        let mut branch_ids = Vec::new();
        dut.for_each_stmt(|s| match s {
            Stmt::If { id, .. } => branch_ids.push(*id),
            Stmt::Assign { id, .. } | Stmt::Next { id, .. } => stmt_ids.push(*id),
        });
        assert_eq!(stmt_ids, vec![0, 1, 2, 3]);
        assert_eq!(branch_ids, vec![0, 1]);
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!(
            "module m (input a[1], output y[1]); assign y = {}a{}; endmodule",
            "(".repeat(5000),
            ")".repeat(5000)
        );
        assert_eq!(parse(&src).unwrap_err().kind, ParseErrorKind::Syntax);
    }

    #[test]
    fn trailing_garbage_rejected() {
        let err = parse("module m (input a[1], output y[1]); endmodule x").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
    }
}
