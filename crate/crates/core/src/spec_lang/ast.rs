use std::fmt;
use std::sync::Arc;

use super::SpecError;

/// Witness label attached to a subformula.
pub type Label = Arc<str>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(String),
    Var(String),
    Wildcard,
}

impl Term {
    pub fn constant(s: impl Into<String>) -> Self {
        Term::Const(s.into())
    }

    pub fn var(s: impl Into<String>) -> Self {
        Term::Var(s.into())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(s) | Term::Var(s) => write!(f, "{s}"),
            Term::Wildcard => write!(f, "_"),
        }
    }
}

/// A relational atom `pred(t1, ..., tn)`. Time is implicit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self { predicate: predicate.into(), args }
    }

    /// Convenience constructor where every argument is a constant (`_` is a wildcard).
    pub fn ground(predicate: &str, args: &[&str]) -> Self {
        Self::new(
            predicate,
            args.iter()
                .map(|a| if *a == "_" { Term::Wildcard } else { Term::constant(*a) })
                .collect(),
        )
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    /// Only produced by negation normal form.
    WeakNext(Box<Formula>),
    Always(Box<Formula>),
    Finally(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    /// Only produced by negation normal form.
    Release(Box<Formula>, Box<Formula>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Formula {
    pub node: Node,
    pub label: Option<Label>,
}

impl From<Atom> for Formula {
    fn from(a: Atom) -> Self {
        Formula::atom(a)
    }
}

impl Formula {
    pub fn new(node: Node) -> Self {
        Self { node, label: None }
    }

    pub fn atom(a: Atom) -> Self {
        Self::new(Node::Atom(a))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Self::new(Node::Not(Box::new(f)))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Self::new(Node::And(Box::new(a), Box::new(b)))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Self::new(Node::Or(Box::new(a), Box::new(b)))
    }

    pub fn next(f: Formula) -> Self {
        Self::new(Node::Next(Box::new(f)))
    }

    pub fn weak_next(f: Formula) -> Self {
        Self::new(Node::WeakNext(Box::new(f)))
    }

    pub fn always(f: Formula) -> Self {
        Self::new(Node::Always(Box::new(f)))
    }

    pub fn finally(f: Formula) -> Self {
        Self::new(Node::Finally(Box::new(f)))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Self::new(Node::Until(Box::new(a), Box::new(b)))
    }

    pub fn release(a: Formula, b: Formula) -> Self {
        Self::new(Node::Release(Box::new(a), Box::new(b)))
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(Label::from(label));
        self
    }

    pub fn children(&self) -> Vec<&Formula> {
        match &self.node {
            Node::Atom(_) => vec![],
            Node::Not(a)
            | Node::Next(a)
            | Node::WeakNext(a)
            | Node::Always(a)
            | Node::Finally(a) => vec![a],
            Node::And(a, b) | Node::Or(a, b) | Node::Until(a, b) | Node::Release(a, b) => {
                vec![a, b]
            }
        }
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let Node::Atom(a) = &n.node {
                out.push(a);
            }
        });
        out
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let Some(l) = &n.label {
                out.push(l.clone());
            }
        });
        out
    }

    pub fn is_temporal(&self) -> bool {
        let mut temporal = false;
        self.visit(&mut |n| {
            if matches!(
                n.node,
                Node::Next(_)
                    | Node::WeakNext(_)
                    | Node::Always(_)
                    | Node::Finally(_)
                    | Node::Until(..)
                    | Node::Release(..)
            ) {
                temporal = true;
            }
        });
        temporal
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    fn is_binary(&self) -> bool {
        matches!(
            self.node,
            Node::And(..) | Node::Or(..) | Node::Until(..) | Node::Release(..)
        )
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.label.is_none() && self.is_binary() {
            write!(f, "(")?;
            self.fmt_bare(f)?;
            write!(f, ")")
        } else {
            write!(f, "{self}")
        }
    }

    fn fmt_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unary = |f: &mut fmt::Formatter<'_>, op: &str, a: &Formula| {
            write!(f, "{op}")?;
            a.fmt_operand(f)
        };
        let binary = |f: &mut fmt::Formatter<'_>, op: &str, a: &Formula, b: &Formula| {
            a.fmt_operand(f)?;
            write!(f, " {op} ")?;
            b.fmt_operand(f)
        };
        match &self.node {
            Node::Atom(a) => write!(f, "{a}"),
            Node::Not(a) => unary(f, "!", a),
            Node::Next(a) => unary(f, "X ", a),
            Node::WeakNext(a) => unary(f, "Xw ", a),
            Node::Always(a) => unary(f, "G ", a),
            Node::Finally(a) => unary(f, "F ", a),
            Node::And(a, b) => binary(f, "&", a, b),
            Node::Or(a, b) => binary(f, "|", a, b),
            Node::Until(a, b) => binary(f, "U", a, b),
            Node::Release(a, b) => binary(f, "R", a, b),
        }
    }
}

/// Prints in the concrete surface syntax. Formulas without `WeakNext`/`Release`
/// parse back to an identical tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => {
                write!(f, "(")?;
                self.fmt_bare(f)?;
                write!(f, ")@{l}")
            }
            None => self.fmt_bare(f),
        }
    }
}

/// `exists v1, ..., vk. body`
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Specification {
    pub vars: Vec<String>,
    pub body: Formula,
}

impl Specification {
    /// Checks closedness, duplicate variables and label uniqueness.
    pub fn new(vars: Vec<String>, body: Formula) -> Result<Self, SpecError> {
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(SpecError::DuplicateVariable(v.clone()));
            }
        }
        for atom in body.atoms() {
            for v in atom.vars() {
                if !vars.iter().any(|q| q == v) {
                    return Err(SpecError::UnboundVariable(v.to_string()));
                }
            }
        }
        let labels = body.labels();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(SpecError::DuplicateLabel(l.to_string()));
            }
        }
        Ok(Self { vars, body })
    }

    /// The same quantifier prefix over a negated body.
    pub fn negated(&self) -> Self {
        Self { vars: self.vars.clone(), body: Formula::not(self.body.clone()) }
    }

    /// Structural identity key: the printed negation normal form.
    pub fn identity_key(&self) -> String {
        Specification { vars: self.vars.clone(), body: super::to_nnf(&self.body) }.to_string()
    }

    pub fn predicates(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.body.atoms().iter().map(|a| a.predicate.as_str()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.vars.is_empty() {
            write!(f, "exists {}. ", self.vars.join(", "))?;
        }
        write!(f, "{}", self.body)
    }
}
