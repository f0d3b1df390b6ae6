use crate::fact_db::{DbError, FactDatabase, Grounding};
use crate::spec_lang::{to_nnf, Atom, Formula, Label, Node, Specification, Term};

use super::{CheckError, Mode};

#[derive(Clone, Debug)]
pub(crate) enum Arg {
    Const(String),
    Var(usize),
    Wild,
}

#[derive(Clone, Debug)]
pub(crate) struct AtomPat {
    pub pred: String,
    pub args: Vec<Arg>,
}

impl AtomPat {
    /// Fact ids matching the pattern at clip `t` under `g`.
    pub fn facts(&self, db: &FactDatabase, g: &Grounding, t: u32) -> Vec<usize> {
        let pattern: Vec<Option<&str>> = self
            .args
            .iter()
            .map(|a| match a {
                Arg::Const(c) => Some(c.as_str()),
                Arg::Var(i) => Some(g.0[*i].as_str()),
                Arg::Wild => None,
            })
            .collect();
        db.matching(&self.pred, t, &pattern)
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Atom(AtomPat),
    NotAtom(AtomPat),
    And(usize, usize),
    Or(usize, usize),
    Next(usize),
    WeakNext(usize),
    Always(usize),
    Finally(usize),
    Until(usize, usize),
    Release(usize, usize),
}

/// The NNF body flattened into an arena; children precede parents.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    pub ops: Vec<Op>,
    pub labels: Vec<Option<Label>>,
    pub root: usize,
}

impl Plan {
    pub fn compile(spec: &Specification, db: &FactDatabase, mode: Mode) -> Result<Plan, CheckError> {
        let mut plan = Plan { ops: Vec::new(), labels: Vec::new(), root: 0 };
        let body = to_nnf(&spec.body);
        plan.root = plan.add(&body, &spec.vars, db, mode)?;
        Ok(plan)
    }

    fn atom(a: &Atom, vars: &[String], db: &FactDatabase) -> Result<AtomPat, CheckError> {
        let decl = db
            .schema()
            .get(&a.predicate)
            .ok_or_else(|| DbError::UnknownPredicate(a.predicate.clone()))?;
        if decl.arity != a.args.len() {
            return Err(DbError::ArityMismatch {
                key: a.to_string(),
                expected: decl.arity,
                found: a.args.len(),
            }
            .into());
        }
        let args = a
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Arg::Const(c.clone()),
                Term::Wildcard => Arg::Wild,
                Term::Var(v) => Arg::Var(vars.iter().position(|x| x == v).expect("closed spec")),
            })
            .collect();
        Ok(AtomPat { pred: a.predicate.clone(), args })
    }

    fn add(
        &mut self,
        f: &Formula,
        vars: &[String],
        db: &FactDatabase,
        mode: Mode,
    ) -> Result<usize, CheckError> {
        let unsupported = |op: &'static str| {
            if mode == Mode::Interval {
                Err(CheckError::UnsupportedOperatorInIntervalMode(op))
            } else {
                Ok(())
            }
        };
        let op = match &f.node {
            Node::Atom(a) => Op::Atom(Self::atom(a, vars, db)?),
            Node::Not(inner) => match &inner.node {
                Node::Atom(a) => Op::NotAtom(Self::atom(a, vars, db)?),
                _ => unreachable!("body is in negation normal form"),
            },
            Node::And(a, b) => Op::And(self.add(a, vars, db, mode)?, self.add(b, vars, db, mode)?),
            Node::Or(a, b) => Op::Or(self.add(a, vars, db, mode)?, self.add(b, vars, db, mode)?),
            Node::Until(a, b) => {
                Op::Until(self.add(a, vars, db, mode)?, self.add(b, vars, db, mode)?)
            }
            Node::Release(a, b) => {
                unsupported("release")?;
                Op::Release(self.add(a, vars, db, mode)?, self.add(b, vars, db, mode)?)
            }
            Node::Next(a) => {
                unsupported("next")?;
                Op::Next(self.add(a, vars, db, mode)?)
            }
            Node::WeakNext(a) => {
                unsupported("weak next")?;
                Op::WeakNext(self.add(a, vars, db, mode)?)
            }
            Node::Always(a) => Op::Always(self.add(a, vars, db, mode)?),
            Node::Finally(a) => Op::Finally(self.add(a, vars, db, mode)?),
        };
        self.ops.push(op);
        self.labels.push(f.label.clone());
        Ok(self.ops.len() - 1)
    }

    pub fn labeled_nodes(&self) -> impl Iterator<Item = (usize, &Label)> {
        self.labels.iter().enumerate().filter_map(|(i, l)| l.as_ref().map(|l| (i, l)))
    }
}
