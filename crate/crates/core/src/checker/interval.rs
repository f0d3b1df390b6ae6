//! Interval matching over half-open clip ranges `[s, e)`, `1 <= s < e <= m + 1`.
//!
//! `a & F b` is read as the binary finally: `a` matches some `[s, e1)`,
//! `b` matches `[s2, e)` with `s < s2`, and the whole matches `[s, e)`.

use crate::fact_db::{FactDatabase, Grounding};
use crate::provenance::{Literal, ProofSet, TopK, Witness};

use super::plan::{Op, Plan};

pub(crate) struct IntervalEval<'a> {
    plan: &'a Plan,
    db: &'a FactDatabase,
    ctx: TopK<'a>,
    g: &'a Grounding,
    m: u32,
    memo: Vec<Option<ProofSet>>,
}

impl<'a> IntervalEval<'a> {
    pub fn new(plan: &'a Plan, db: &'a FactDatabase, ctx: TopK<'a>, g: &'a Grounding) -> Self {
        let m = db.num_clips();
        let side = (m + 2) as usize;
        Self { plan, db, ctx, g, m, memo: vec![None; plan.ops.len() * side * side] }
    }

    fn slot(&self, n: usize, s: u32, e: u32) -> usize {
        let side = (self.m + 2) as usize;
        (n * side + s as usize) * side + e as usize
    }

    /// An atom or negated atom at the single clip `t`.
    fn point(&self, n: usize, t: u32) -> ProofSet {
        let ctx = self.ctx;
        match &self.plan.ops[n] {
            Op::Atom(a) => {
                let lits: Vec<ProofSet> = a
                    .facts(self.db, self.g, t)
                    .into_iter()
                    .map(|f| ctx.literal(Literal::pos(f)))
                    .collect();
                ctx.or_all(lits.iter())
            }
            Op::NotAtom(a) => {
                let lits: Vec<ProofSet> = a
                    .facts(self.db, self.g, t)
                    .into_iter()
                    .map(|f| ctx.literal(Literal::neg(f)))
                    .collect();
                ctx.and_all(lits.iter())
            }
            _ => unreachable!("point evaluation of a non-atom"),
        }
    }

    /// Proofs that node `n` matches `[s, e)`.
    pub fn eval(&mut self, n: usize, s: u32, e: u32) -> ProofSet {
        debug_assert!(1 <= s && s < e && e <= self.m + 1);
        let slot = self.slot(n, s, e);
        if let Some(ps) = &self.memo[slot] {
            return ps.clone();
        }
        let ctx = self.ctx;
        let m = self.m;
        let plan = self.plan;
        let mut out = match &plan.ops[n] {
            Op::Atom(_) | Op::NotAtom(_) => {
                let points: Vec<ProofSet> = (s..e).map(|t| self.point(n, t)).collect();
                ctx.and_all(points.iter())
            }
            &Op::And(a, b) => {
                if let Op::Finally(c) = plan.ops[b] {
                    let finally_label = plan.labels[b].clone();
                    let starts: Vec<ProofSet> = (s + 1..=m + 1).map(|e1| self.eval(a, s, e1)).collect();
                    let first = ctx.or_all(starts.iter());
                    if first.is_empty() {
                        first
                    } else {
                        let mut parts = Vec::new();
                        for s2 in s + 1..e {
                            let mut second = self.eval(c, s2, e);
                            if let Some(l) = &finally_label {
                                second = ctx.annotate(&second, l, Witness::Span(s2, e));
                            }
                            parts.push(ctx.and(&first, &second));
                        }
                        ctx.or_all(parts.iter())
                    }
                } else {
                    let x = self.eval(a, s, e);
                    if x.is_empty() {
                        x
                    } else {
                        let y = self.eval(b, s, e);
                        ctx.and(&x, &y)
                    }
                }
            }
            &Op::Or(a, b) => {
                let x = self.eval(a, s, e);
                let y = self.eval(b, s, e);
                ctx.or(&x, &y)
            }
            &Op::Until(a, b) => {
                let mut parts = Vec::new();
                for mid in s + 1..e {
                    let x = self.eval(a, s, mid);
                    if !x.is_empty() {
                        let y = self.eval(b, mid, e);
                        parts.push(ctx.and(&x, &y));
                    }
                }
                ctx.or_all(parts.iter())
            }
            &Op::Always(a) => self.eval(a, s, e),
            &Op::Finally(a) => {
                let mut parts = Vec::new();
                for s1 in s..e {
                    for e1 in s1 + 1..=e {
                        parts.push(self.eval(a, s1, e1));
                    }
                }
                ctx.or_all(parts.iter())
            }
            Op::Next(_) | Op::WeakNext(_) | Op::Release(..) => {
                unreachable!("rejected when the plan was compiled")
            }
        };
        if let Some(label) = &self.plan.labels[n] {
            out = ctx.annotate(&out, label, Witness::Span(s, e));
        }
        self.memo[slot] = Some(out.clone());
        out
    }
}
