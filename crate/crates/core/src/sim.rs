//! Cycle-accurate simulation with statement, branch and functional coverage.
//!
//! Each cycle evaluates the body top to bottom. Registers read their current
//! value, `next` schedules an update that latches at the end of the cycle,
//! wires read the value assigned earlier in the same cycle (0 otherwise).
//! Covergroups sample after the body has run and before registers latch.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize, Serializer};

use crate::hdl::{lint, BinaryOp, DutModel, Expr, LintIssue, Stmt, UnaryOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("design has lint issues: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    NotLintClean(Vec<LintIssue>),
    #[error("cycle {cycle}: no value for input `{port}`")]
    MissingInput { cycle: usize, port: String },
    #[error("cycle {cycle}: value {value} does not fit input `{port}`")]
    ValueOutOfRange {
        cycle: usize,
        port: String,
        value: u64,
    },
    #[error("cycle {cycle}: `{port}` is not an input port")]
    UnknownInput { cycle: usize, port: String },
    #[error("cycle {cycle}: input `{port}` assigned more than once")]
    DuplicateInput { cycle: usize, port: String },
    #[error("cycle {cycle}: expected {expected} input values, got {got}")]
    ExtraValues {
        cycle: usize,
        expected: usize,
        got: usize,
    },
}

/// Input values per cycle; each cycle lists one value per input port in
/// declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub cycles: Vec<Vec<u64>>,
}

impl Stimulus {
    pub fn new(cycles: Vec<Vec<u64>>) -> Self {
        Self { cycles }
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Builds a stimulus from `name=value` assignments per cycle.
    pub fn from_named(dut: &DutModel, cycles: &[Vec<(String, u64)>]) -> Result<Self, SimError> {
        let inputs: Vec<&str> = dut.inputs().map(|p| p.name.as_str()).collect();
        let mut out = Vec::with_capacity(cycles.len());
        for (cycle, assignments) in cycles.iter().enumerate() {
            let mut values: Vec<Option<u64>> = vec![None; inputs.len()];
            for (name, value) in assignments {
                let idx = inputs.iter().position(|p| p == name).ok_or_else(|| {
                    SimError::UnknownInput {
                        cycle,
                        port: name.clone(),
                    }
                })?;
                if values[idx].replace(*value).is_some() {
                    return Err(SimError::DuplicateInput {
                        cycle,
                        port: name.clone(),
                    });
                }
            }
            let values = values
                .into_iter()
                .zip(&inputs)
                .map(|(v, port)| {
                    v.ok_or_else(|| SimError::MissingInput {
                        cycle,
                        port: port.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(values);
        }
        Ok(Self::new(out))
    }
}

/// Covered-versus-total counter for one metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
pub struct Counter {
    pub covered: usize,
    pub total: usize,
}

impl Counter {
    pub fn new(covered: usize, total: usize) -> Self {
        Self { covered, total }
    }

    /// `covered / total`, or 0 for a metric with no points.
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.covered as f64 / self.total as f64
        }
    }
}

impl Serialize for Counter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Counter", 3)?;
        s.serialize_field("covered", &self.covered)?;
        s.serialize_field("total", &self.total)?;
        s.serialize_field("fraction", &self.fraction())?;
        s.end()
    }
}

/// Statement, branch and functional counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCounts {
    pub statement: Counter,
    pub branch: Counter,
    pub functional: Counter,
}

impl CoverageCounts {
    pub fn metrics(&self) -> [Counter; 3] {
        [self.statement, self.branch, self.functional]
    }

    /// Unweighted mean of the fractions of metrics that have points; 0 when none do.
    pub fn average(&self) -> f64 {
        let present: Vec<f64> = self
            .metrics()
            .iter()
            .filter(|c| c.total > 0)
            .map(Counter::fraction)
            .collect();
        if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        }
    }

    /// Exact comparison of averages, immune to floating-point rounding.
    pub fn cmp_average(&self, other: &Self) -> Ordering {
        match (self.exact_average(), other.exact_average()) {
            (Some((n1, d1)), Some((n2, d2))) => match (n1.checked_mul(d2), n2.checked_mul(d1)) {
                (Some(a), Some(b)) => a.cmp(&b),
                _ => self.average().total_cmp(&other.average()),
            },
            _ => self.average().total_cmp(&other.average()),
        }
    }

    fn exact_average(&self) -> Option<(u128, u128)> {
        let present: Vec<Counter> = self.metrics().into_iter().filter(|c| c.total > 0).collect();
        if present.is_empty() {
            return Some((0, 1));
        }
        let mut den: u128 = present.len() as u128;
        for c in &present {
            den = den.checked_mul(c.total as u128)?;
        }
        let mut num: u128 = 0;
        for c in &present {
            let share = den / (c.total as u128 * present.len() as u128);
            num = num.checked_add(share.checked_mul(c.covered as u128)?)?;
        }
        Some((num, den))
    }
}

/// Result of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub statement: Counter,
    pub branch: Counter,
    pub functional: Counter,
    pub average: f64,
    pub cycles_run: usize,
}

impl CoverageReport {
    pub fn from_counts(counts: CoverageCounts, cycles_run: usize) -> Self {
        Self {
            statement: counts.statement,
            branch: counts.branch,
            functional: counts.functional,
            average: counts.average(),
            cycles_run,
        }
    }

    /// Nothing covered; used for generations that fail to decode.
    pub fn zero(dut: &DutModel) -> Self {
        Self::from_counts(
            CoverageCounts {
                statement: Counter::new(0, dut.total_statements()),
                branch: Counter::new(0, dut.total_branch_outcomes()),
                functional: Counter::new(0, dut.total_bins()),
            },
            0,
        )
    }

    pub fn counts(&self) -> CoverageCounts {
        CoverageCounts {
            statement: self.statement,
            branch: self.branch,
            functional: self.functional,
        }
    }
}

/// Averaged coverage score used for preference labeling.
pub fn average_score(report: &CoverageReport) -> f64 {
    report.counts().average()
}

#[derive(Debug, Clone)]
enum CExpr {
    Slot(usize),
    Const(u64),
    Unary(UnaryOp, Box<CExpr>),
    Binary(BinaryOp, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    fn eval(&self, values: &[u64]) -> u64 {
        match self {
            CExpr::Slot(i) => values[*i],
            CExpr::Const(v) => *v,
            CExpr::Unary(op, inner) => {
                let v = inner.eval(values);
                match op {
                    UnaryOp::Not => !v,
                    UnaryOp::LogicalNot => u64::from(v == 0),
                }
            }
            CExpr::Binary(op, lhs, rhs) => {
                let a = lhs.eval(values);
                let b = rhs.eval(values);
                match op {
                    BinaryOp::Or => a | b,
                    BinaryOp::Xor => a ^ b,
                    BinaryOp::And => a & b,
                    BinaryOp::Eq => u64::from(a == b),
                    BinaryOp::Ne => u64::from(a != b),
                    BinaryOp::Lt => u64::from(a < b),
                    BinaryOp::Gt => u64::from(a > b),
                    BinaryOp::Shl => a << b.min(63),
                    BinaryOp::Shr => a >> b.min(63),
                    BinaryOp::Add => a.wrapping_add(b),
                    BinaryOp::Sub => a.wrapping_sub(b),
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum CStmt {
    Assign {
        slot: usize,
        mask: u64,
        expr: CExpr,
        id: usize,
    },
    Next {
        slot: usize,
        mask: u64,
        expr: CExpr,
        id: usize,
    },
    If {
        cond: CExpr,
        then_body: Vec<CStmt>,
        else_body: Vec<CStmt>,
        id: usize,
    },
}

#[derive(Debug, Clone)]
struct CBin {
    slot: usize,
    lo: u64,
    hi: u64,
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// A design lowered to slot-indexed form, reusable across simulations.
#[derive(Debug, Clone)]
pub struct Simulator {
    names: Vec<String>,
    input_slots: Vec<usize>,
    input_masks: Vec<u64>,
    wire_slots: Vec<usize>,
    reg_inits: Vec<(usize, u64)>,
    body: Vec<CStmt>,
    bins: Vec<CBin>,
    num_statements: usize,
    num_branch_outcomes: usize,
}

struct CycleState<'a> {
    values: Vec<u64>,
    pending: Vec<Option<u64>>,
    stmt_hit: &'a mut [bool],
    branch_hit: &'a mut [bool],
}

impl Simulator {
    /// Lowers a lint-clean design.
    pub fn new(dut: &DutModel) -> Result<Self, SimError> {
        let issues = lint(dut);
        if !issues.is_empty() {
            return Err(SimError::NotLintClean(issues));
        }
        let mut names = Vec::new();
        let mut widths = Vec::new();
        let mut slot_of = HashMap::new();
        let mut declare = |name: &str, width: u32| {
            slot_of.insert(name.to_string(), names.len());
            names.push(name.to_string());
            widths.push(width);
            names.len() - 1
        };
        let input_slots: Vec<usize> = dut.inputs().map(|p| declare(&p.name, p.width)).collect();
        let input_masks: Vec<u64> = dut.inputs().map(|p| mask(p.width)).collect();
        let mut wire_slots: Vec<usize> = dut.outputs().map(|p| declare(&p.name, p.width)).collect();
        let reg_inits: Vec<(usize, u64)> = dut
            .regs
            .iter()
            .map(|r| (declare(&r.name, r.width), r.init))
            .collect();
        wire_slots.extend(dut.wires.iter().map(|w| declare(&w.name, w.width)));

        let lower_expr = |expr: &Expr| -> CExpr { lower(expr, &slot_of) };
        fn lower(expr: &Expr, slot_of: &HashMap<String, usize>) -> CExpr {
            match expr {
                Expr::Ident { name, .. } => CExpr::Slot(slot_of[name]),
                Expr::Const(v) => CExpr::Const(*v),
                Expr::Unary(op, inner) => CExpr::Unary(*op, Box::new(lower(inner, slot_of))),
                Expr::Binary(op, lhs, rhs) => CExpr::Binary(
                    *op,
                    Box::new(lower(lhs, slot_of)),
                    Box::new(lower(rhs, slot_of)),
                ),
            }
        }
        fn lower_body(
            body: &[Stmt],
            lower_expr: &dyn Fn(&Expr) -> CExpr,
            slot_of: &HashMap<String, usize>,
            widths: &[u32],
        ) -> Vec<CStmt> {
            body.iter()
                .map(|stmt| match stmt {
                    Stmt::Assign {
                        target, expr, id, ..
                    } => {
                        let slot = slot_of[target];
                        CStmt::Assign {
                            slot,
                            mask: mask(widths[slot]),
                            expr: lower_expr(expr),
                            id: *id,
                        }
                    }
                    Stmt::Next {
                        target, expr, id, ..
                    } => {
                        let slot = slot_of[target];
                        CStmt::Next {
                            slot,
                            mask: mask(widths[slot]),
                            expr: lower_expr(expr),
                            id: *id,
                        }
                    }
                    Stmt::If {
                        cond,
                        then_body,
                        else_body,
                        id,
                        ..
                    } => CStmt::If {
                        cond: lower_expr(cond),
                        then_body: lower_body(then_body, lower_expr, slot_of, widths),
                        else_body: else_body
                            .as_deref()
                            .map(|b| lower_body(b, lower_expr, slot_of, widths))
                            .unwrap_or_default(),
                        id: *id,
                    },
                })
                .collect()
        }
        let body = lower_body(&dut.body, &lower_expr, &slot_of, &widths);
        let bins = dut
            .covergroups
            .iter()
            .flat_map(|cg| {
                let slot = slot_of[&cg.signal];
                cg.bins.iter().map(move |b| CBin {
                    slot,
                    lo: b.lo,
                    hi: b.hi,
                })
            })
            .collect();
        Ok(Self {
            names,
            input_slots,
            input_masks,
            wire_slots,
            reg_inits,
            body,
            bins,
            num_statements: dut.total_statements(),
            num_branch_outcomes: dut.total_branch_outcomes(),
        })
    }

    fn check(&self, stim: &Stimulus) -> Result<(), SimError> {
        for (cycle, values) in stim.cycles.iter().enumerate() {
            if values.len() > self.input_slots.len() {
                return Err(SimError::ExtraValues {
                    cycle,
                    expected: self.input_slots.len(),
                    got: values.len(),
                });
            }
            if let Some(&slot) = self.input_slots.get(values.len()) {
                return Err(SimError::MissingInput {
                    cycle,
                    port: self.names[slot].clone(),
                });
            }
        }
        Ok(())
    }

    pub fn run(&self, stim: &Stimulus) -> Result<CoverageReport, SimError> {
        self.run_inner(stim, None)
    }

    /// Like [`Simulator::run`], also returning one line per cycle with every
    /// signal value as sampled (registers before latching).
    pub fn run_traced(&self, stim: &Stimulus) -> Result<(CoverageReport, Vec<String>), SimError> {
        let mut trace = Vec::new();
        let report = self.run_inner(stim, Some(&mut trace))?;
        Ok((report, trace))
    }

    fn run_inner(
        &self,
        stim: &Stimulus,
        mut trace: Option<&mut Vec<String>>,
    ) -> Result<CoverageReport, SimError> {
        self.check(stim)?;
        let mut stmt_hit = vec![false; self.num_statements];
        let mut branch_hit = vec![false; self.num_branch_outcomes];
        let mut bin_hit = vec![false; self.bins.len()];
        let mut regs: Vec<(usize, u64)> = self.reg_inits.clone();

        for (cycle, inputs) in stim.cycles.iter().enumerate() {
            let mut state = CycleState {
                values: vec![0; self.names.len()],
                pending: vec![None; self.names.len()],
                stmt_hit: &mut stmt_hit,
                branch_hit: &mut branch_hit,
            };
            for ((&slot, &value), &m) in self.input_slots.iter().zip(inputs).zip(&self.input_masks)
            {
                if value & !m != 0 {
                    return Err(SimError::ValueOutOfRange {
                        cycle,
                        port: self.names[slot].clone(),
                        value,
                    });
                }
                state.values[slot] = value;
            }
            for &(slot, value) in &regs {
                state.values[slot] = value;
            }
            for &w in &self.wire_slots {
                state.values[w] = 0;
            }
            exec(&self.body, &mut state);
            for (hit, bin) in bin_hit.iter_mut().zip(&self.bins) {
                let v = state.values[bin.slot];
                if (bin.lo..=bin.hi).contains(&v) {
                    *hit = true;
                }
            }
            if let Some(trace) = trace.as_deref_mut() {
                let line = self
                    .names
                    .iter()
                    .zip(&state.values)
                    .map(|(n, v)| format!("{n}={v}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                trace.push(format!("cycle {cycle}: {line}"));
            }
            for (slot, value) in regs.iter_mut() {
                if let Some(next) = state.pending[*slot] {
                    *value = next;
                }
            }
        }

        let count = |hits: &[bool]| Counter::new(hits.iter().filter(|&&h| h).count(), hits.len());
        Ok(CoverageReport::from_counts(
            CoverageCounts {
                statement: count(&stmt_hit),
                branch: count(&branch_hit),
                functional: count(&bin_hit),
            },
            stim.len(),
        ))
    }
}

fn exec(body: &[CStmt], state: &mut CycleState<'_>) {
    for stmt in body {
        match stmt {
            CStmt::Assign {
                slot,
                mask,
                expr,
                id,
            } => {
                state.values[*slot] = expr.eval(&state.values) & mask;
                state.stmt_hit[*id] = true;
            }
            CStmt::Next {
                slot,
                mask,
                expr,
                id,
            } => {
                state.pending[*slot] = Some(expr.eval(&state.values) & mask);
                state.stmt_hit[*id] = true;
            }
            CStmt::If {
                cond,
                then_body,
                else_body,
                id,
            } => {
                if cond.eval(&state.values) != 0 {
                    state.branch_hit[2 * id] = true;
                    exec(then_body, state);
                } else {
                    state.branch_hit[2 * id + 1] = true;
                    exec(else_body, state);
                }
            }
        }
    }
}

/// Simulates `stim` on `dut` from reset.
pub fn simulate(dut: &DutModel, stim: &Stimulus) -> Result<CoverageReport, SimError> {
    Simulator::new(dut)?.run(stim)
}
