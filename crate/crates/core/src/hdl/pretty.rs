use std::fmt::Write;

use super::{Direction, DutModel, Expr, Stmt, UnaryOp};

/// Renders a design back to source. Declarations come first, then the body,
/// then covergroups; parsing the output yields a structurally equal model.
pub fn pretty_print(dut: &DutModel) -> String {
    let mut out = String::new();
    let ports: Vec<String> = dut
        .ports
        .iter()
        .map(|p| {
            let dir = match p.direction {
                Direction::Input => "input",
                Direction::Output => "output",
            };
            format!("{dir} {}[{}]", p.name, p.width)
        })
        .collect();
    let _ = writeln!(out, "module {} ({});", dut.name, ports.join(", "));
    for r in &dut.regs {
        let _ = writeln!(out, "  reg {}[{}] = {};", r.name, r.width, r.init);
    }
    for w in &dut.wires {
        let _ = writeln!(out, "  wire {}[{}];", w.name, w.width);
    }
    for stmt in &dut.body {
        emit_stmt(&mut out, stmt, 1);
    }
    for cg in &dut.covergroups {
        let bins: Vec<String> = cg
            .bins
            .iter()
            .map(|b| format!("{}: {}..{}", b.name, b.lo, b.hi))
            .collect();
        let _ = writeln!(out, "  cover {} {{ {} }}", cg.signal, bins.join(", "));
    }
    out.push_str("endmodule\n");
    out
}

fn emit_block(out: &mut String, body: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for stmt in body {
        emit_stmt(out, stmt, depth + 1);
    }
    out.push_str(&"  ".repeat(depth));
    out.push('}');
}

fn emit_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    out.push_str(&"  ".repeat(depth));
    match stmt {
        Stmt::Assign { target, expr, .. } => {
            let _ = writeln!(out, "assign {target} = {};", expr_text(expr));
        }
        Stmt::Next { target, expr, .. } => {
            let _ = writeln!(out, "next {target} = {};", expr_text(expr));
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            let _ = write!(out, "if ({}) ", expr_text(cond));
            emit_block(out, then_body, depth);
            if let Some(else_body) = else_body {
                out.push_str(" else ");
                emit_block(out, else_body, depth);
            }
            out.push('\n');
        }
    }
}

/// Minimal parentheses for left-associative binary operators.
fn expr_text(expr: &Expr) -> String {
    match expr {
        Expr::Ident { name, .. } => name.clone(),
        Expr::Const(v) => v.to_string(),
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnaryOp::Not => "~",
                UnaryOp::LogicalNot => "!",
            };
            match inner.as_ref() {
                Expr::Binary(..) => format!("{sym}({})", expr_text(inner)),
                _ => format!("{sym}{}", expr_text(inner)),
            }
        }
        Expr::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            let side = |e: &Expr, needs: &dyn Fn(u8) -> bool| match e {
                Expr::Binary(inner, ..) if needs(inner.precedence()) => {
                    format!("({})", expr_text(e))
                }
                _ => expr_text(e),
            };
            format!(
                "{} {} {}",
                side(lhs, &|p| p < prec),
                op.symbol(),
                side(rhs, &|p| p <= prec)
            )
        }
    }
}
