//! Finite-trace LTL over clip positions `1..=m`.

use crate::fact_db::{FactDatabase, Grounding};
use crate::provenance::{ps_false, ps_true, Literal, ProofSet, TopK, Witness};

use super::plan::{Op, Plan};

pub(crate) struct SuffixEval<'a> {
    plan: &'a Plan,
    db: &'a FactDatabase,
    ctx: TopK<'a>,
    g: &'a Grounding,
    m: u32,
    memo: Vec<Option<ProofSet>>,
}

impl<'a> SuffixEval<'a> {
    pub fn new(plan: &'a Plan, db: &'a FactDatabase, ctx: TopK<'a>, g: &'a Grounding) -> Self {
        let m = db.num_clips();
        Self { plan, db, ctx, g, m, memo: vec![None; plan.ops.len() * m as usize] }
    }

    pub fn eval(&mut self, n: usize, i: u32) -> ProofSet {
        let slot = n * self.m as usize + (i - 1) as usize;
        if let Some(ps) = &self.memo[slot] {
            return ps.clone();
        }
        let ctx = self.ctx;
        let m = self.m;
        let plan = self.plan;
        let mut out = match &plan.ops[n] {
            Op::Atom(a) => {
                let lits: Vec<ProofSet> = a
                    .facts(self.db, self.g, i)
                    .into_iter()
                    .map(|f| ctx.literal(Literal::pos(f)))
                    .collect();
                ctx.or_all(lits.iter())
            }
            Op::NotAtom(a) => {
                let lits: Vec<ProofSet> = a
                    .facts(self.db, self.g, i)
                    .into_iter()
                    .map(|f| ctx.literal(Literal::neg(f)))
                    .collect();
                ctx.and_all(lits.iter())
            }
            &Op::And(a, b) => {
                let x = self.eval(a, i);
                if x.is_empty() {
                    x
                } else {
                    let y = self.eval(b, i);
                    ctx.and(&x, &y)
                }
            }
            &Op::Or(a, b) => {
                let x = self.eval(a, i);
                let y = self.eval(b, i);
                ctx.or(&x, &y)
            }
            &Op::Next(a) => {
                if i < m {
                    self.eval(a, i + 1)
                } else {
                    ps_false()
                }
            }
            &Op::WeakNext(a) => {
                if i < m {
                    self.eval(a, i + 1)
                } else {
                    ps_true()
                }
            }
            &Op::Always(a) => {
                let parts: Vec<ProofSet> = (i..=m).map(|j| self.eval(a, j)).collect();
                ctx.and_all(parts.iter())
            }
            &Op::Finally(a) => {
                let parts: Vec<ProofSet> = (i..=m).map(|j| self.eval(a, j)).collect();
                ctx.or_all(parts.iter())
            }
            &Op::Until(a, b) => {
                // OR_j ( b@j AND_{l<j} a@l )
                let mut prefix = ps_true();
                let mut parts = Vec::new();
                for j in i..=m {
                    let here = self.eval(b, j);
                    parts.push(ctx.and(&here, &prefix));
                    if j < m {
                        let step = self.eval(a, j);
                        prefix = ctx.and(&prefix, &step);
                        if prefix.is_empty() {
                            break;
                        }
                    }
                }
                ctx.or_all(parts.iter())
            }
            &Op::Release(a, b) => {
                // OR_j ( a@j AND_{l<=j} b@l )  OR  AND_{l<=m} b@l
                let mut prefix = ps_true();
                let mut parts = Vec::new();
                for j in i..=m {
                    let step = self.eval(b, j);
                    prefix = ctx.and(&prefix, &step);
                    if prefix.is_empty() {
                        break;
                    }
                    let here = self.eval(a, j);
                    parts.push(ctx.and(&here, &prefix));
                    if j == m {
                        parts.push(prefix.clone());
                    }
                }
                ctx.or_all(parts.iter())
            }
        };
        if let Some(label) = &self.plan.labels[n] {
            out = ctx.annotate(&out, label, Witness::At(i));
        }
        self.memo[slot] = Some(out.clone());
        out
    }
}
