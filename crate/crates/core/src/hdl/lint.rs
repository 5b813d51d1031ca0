use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Direction, DutModel, Loc, Stmt, MAX_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintKind {
    AssignToInput,
    /// `assign` whose target is a register.
    AssignToReg,
    NextToNonReg,
    UndeclaredIdentifier,
    DuplicateIdentifier,
    WidthOutOfRange,
    /// Register reset value does not fit its width.
    InitOutOfRange,
    BinOutOfRange,
    EmptyCovergroup,
    NoInputs,
    NoOutputs,
    WireNeverAssigned,
}

impl LintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LintKind::AssignToInput => "assign_to_input",
            LintKind::AssignToReg => "assign_to_reg",
            LintKind::NextToNonReg => "next_to_non_reg",
            LintKind::UndeclaredIdentifier => "undeclared_identifier",
            LintKind::DuplicateIdentifier => "duplicate_identifier",
            LintKind::WidthOutOfRange => "width_out_of_range",
            LintKind::InitOutOfRange => "init_out_of_range",
            LintKind::BinOutOfRange => "bin_out_of_range",
            LintKind::EmptyCovergroup => "empty_covergroup",
            LintKind::NoInputs => "no_inputs",
            LintKind::NoOutputs => "no_outputs",
            LintKind::WireNeverAssigned => "wire_never_assigned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintIssue {
    pub kind: LintKind,
    pub loc: Loc,
    pub message: String,
}

impl std::fmt::Display for LintIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}: {}", self.loc, self.kind.as_str(), self.message)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SignalKind {
    Input,
    Output,
    Reg,
    Wire,
}

/// Static rule check. An empty result means the design can be simulated.
/// Issues are returned in source order.
pub fn lint(dut: &DutModel) -> Vec<LintIssue> {
    let mut issues = Vec::new();
    let mut push = |kind, loc, message: String| issues.push(LintIssue { kind, loc, message });

    let mut symbols: HashMap<&str, (SignalKind, u32)> = HashMap::new();
    let decls = dut
        .ports
        .iter()
        .map(|p| {
            let kind = match p.direction {
                Direction::Input => SignalKind::Input,
                Direction::Output => SignalKind::Output,
            };
            (p.name.as_str(), kind, p.width, p.loc)
        })
        .chain(
            dut.regs
                .iter()
                .map(|r| (r.name.as_str(), SignalKind::Reg, r.width, r.loc)),
        )
        .chain(
            dut.wires
                .iter()
                .map(|w| (w.name.as_str(), SignalKind::Wire, w.width, w.loc)),
        );
    for (name, kind, width, loc) in decls {
        if !(1..=MAX_WIDTH).contains(&width) {
            push(
                LintKind::WidthOutOfRange,
                loc,
                format!("`{name}` has width {width}, expected 1..={MAX_WIDTH}"),
            );
        }
        if symbols.contains_key(name) {
            push(
                LintKind::DuplicateIdentifier,
                loc,
                format!("`{name}` is declared more than once"),
            );
        } else {
            symbols.insert(name, (kind, width));
        }
    }
    for reg in &dut.regs {
        if (1..=MAX_WIDTH).contains(&reg.width) && reg.init >> reg.width != 0 {
            push(
                LintKind::InitOutOfRange,
                reg.loc,
                format!(
                    "`{}` init {} does not fit in {} bits",
                    reg.name, reg.init, reg.width
                ),
            );
        }
    }

    let declared = |name: &str| symbols.get(name).copied();
    let mut assigned: HashMap<&str, bool> = HashMap::new();
    let mut reads = Vec::new();
    dut.for_each_stmt(|stmt| match stmt {
        Stmt::Assign {
            target, expr, loc, ..
        } => {
            match declared(target) {
                None => push(
                    LintKind::UndeclaredIdentifier,
                    *loc,
                    format!("`{target}` is not declared"),
                ),
                Some((SignalKind::Input, _)) => push(
                    LintKind::AssignToInput,
                    *loc,
                    format!("`{target}` is an input and cannot be assigned"),
                ),
                Some((SignalKind::Reg, _)) => push(
                    LintKind::AssignToReg,
                    *loc,
                    format!("`{target}` is a register; use `next`"),
                ),
                Some(_) => {
                    assigned.insert(target.as_str(), true);
                }
            }
            reads.push(expr);
        }
        Stmt::Next {
            target, expr, loc, ..
        } => {
            match declared(target) {
                None => push(
                    LintKind::UndeclaredIdentifier,
                    *loc,
                    format!("`{target}` is not declared"),
                ),
                Some((SignalKind::Reg, _)) => {}
                Some(_) => push(
                    LintKind::NextToNonReg,
                    *loc,
                    format!("`{target}` is not a register"),
                ),
            }
            reads.push(expr);
        }
        Stmt::If { cond, .. } => reads.push(cond),
    });

    let mut deferred = Vec::new();
    for expr in reads {
        expr.for_each_ident(&mut |name, loc| {
            if declared(name).is_none() {
                deferred.push(LintIssue {
                    kind: LintKind::UndeclaredIdentifier,
                    loc,
                    message: format!("`{name}` is not declared"),
                });
            }
        });
    }

    for cg in &dut.covergroups {
        let width = match declared(&cg.signal) {
            None => {
                push(
                    LintKind::UndeclaredIdentifier,
                    cg.loc,
                    format!("covergroup signal `{}` is not declared", cg.signal),
                );
                None
            }
            Some((_, w)) => Some(w),
        };
        if cg.bins.is_empty() {
            push(
                LintKind::EmptyCovergroup,
                cg.loc,
                format!("covergroup on `{}` has no bins", cg.signal),
            );
        }
        let mut seen: Vec<&str> = Vec::new();
        for bin in &cg.bins {
            if seen.contains(&bin.name.as_str()) {
                push(
                    LintKind::DuplicateIdentifier,
                    bin.loc,
                    format!("bin `{}` is declared more than once", bin.name),
                );
            }
            seen.push(&bin.name);
            let limit = width
                .filter(|w| (1..=MAX_WIDTH).contains(w))
                .map(|w| 1u64 << w);
            if bin.lo > bin.hi || limit.is_some_and(|limit| bin.hi >= limit) {
                push(
                    LintKind::BinOutOfRange,
                    bin.loc,
                    format!(
                        "bin `{}` range {}..{} is empty or exceeds `{}`",
                        bin.name, bin.lo, bin.hi, cg.signal
                    ),
                );
            }
        }
    }

    if dut.inputs().next().is_none() {
        push(
            LintKind::NoInputs,
            dut.loc,
            "design has no input ports".into(),
        );
    }
    if dut.outputs().next().is_none() {
        push(
            LintKind::NoOutputs,
            dut.loc,
            "design has no output ports".into(),
        );
    }
    let driven = dut
        .outputs()
        .map(|p| (p.name.as_str(), p.loc))
        .chain(dut.wires.iter().map(|w| (w.name.as_str(), w.loc)));
    for (name, loc) in driven {
        if !assigned.contains_key(name) {
            push(
                LintKind::WireNeverAssigned,
                loc,
                format!("`{name}` is never assigned"),
            );
        }
    }

    issues.extend(deferred);
    issues.sort_by_key(|issue| issue.loc.key());
    issues
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::hdl::parse;

    fn kinds(src: &str) -> Vec<LintKind> {
        lint(&parse(src).unwrap())
            .into_iter()
            .map(|i| i.kind)
            .collect()
    }

    #[test]
    fn bundled_designs_are_clean() {
        for (name, src) in corpus::BUNDLED {
            assert_eq!(lint(&parse(src).unwrap()), vec![], "{name}");
        }
    }

    #[test]
    fn assign_to_input() {
        assert_eq!(
            kinds("module m (input a[1], output y[1]); assign a = 1; assign y = a; endmodule"),
            vec![LintKind::AssignToInput]
        );
    }

    #[test]
    fn next_to_wire() {
        assert_eq!(
            kinds(
                "module m (input a[1], output y[1]); wire w[1]; assign w = a; next w = 1; assign y = w; endmodule"
            ),
            vec![LintKind::NextToNonReg]
        );
    }

    #[test]
    fn assign_to_reg() {
        assert_eq!(
            kinds("module m (input a[1], output y[1]); reg r[1] = 0; assign r = a; assign y = r; endmodule"),
            vec![LintKind::AssignToReg]
        );
    }

    #[test]
    fn declaration_rules() {
        assert_eq!(
            kinds(
                "module m (input a[1], input a[2], output y[17]); reg r[2] = 4; assign y = b; endmodule"
            ),
            vec![
                LintKind::DuplicateIdentifier,
                LintKind::WidthOutOfRange,
                LintKind::InitOutOfRange,
                LintKind::UndeclaredIdentifier
            ]
        );
    }

    #[test]
    fn covergroup_rules() {
        assert_eq!(
            kinds(
                "module m (input a[2], output y[1]); assign y = a == 0; cover a { lo: 0..1, hi: 3..4 } cover a { x: 2..1 } cover q { z: 0..0 } endmodule"
            ),
            vec![
                LintKind::BinOutOfRange,
                LintKind::BinOutOfRange,
                LintKind::UndeclaredIdentifier
            ]
        );
    }

    #[test]
    fn missing_ports_and_drivers() {
        assert_eq!(
            kinds("module m (output y[1]); wire w[1]; endmodule"),
            vec![
                LintKind::NoInputs,
                LintKind::WireNeverAssigned,
                LintKind::WireNeverAssigned
            ]
        );
        assert_eq!(
            kinds("module m (input a[1]); endmodule"),
            vec![LintKind::NoOutputs]
        );
    }

    #[test]
    fn empty_covergroup_on_constructed_model() {
        let mut dut = parse(corpus::TOY1).unwrap();
        dut.covergroups[0].bins.clear();
        assert_eq!(
            lint(&dut).into_iter().map(|i| i.kind).collect::<Vec<_>>(),
            vec![LintKind::EmptyCovergroup]
        );
    }
}
