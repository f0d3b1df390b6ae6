use super::ast::{Formula, Label, Node};

fn relabel(mut f: Formula, outer: &Option<Label>) -> Formula {
    if f.label.is_none() {
        f.label = outer.clone();
    }
    f
}

/// Negation normal form: `Not` only directly above atoms.
///
/// Labels stay on the node that replaces the labeled one; when a negation
/// is pushed through a labeled node, the inner label takes precedence.
pub fn to_nnf(f: &Formula) -> Formula {
    let node = match &f.node {
        Node::Atom(_) => return f.clone(),
        Node::Not(inner) => return relabel(negate(inner), &f.label),
        Node::And(a, b) => Node::And(Box::new(to_nnf(a)), Box::new(to_nnf(b))),
        Node::Or(a, b) => Node::Or(Box::new(to_nnf(a)), Box::new(to_nnf(b))),
        Node::Until(a, b) => Node::Until(Box::new(to_nnf(a)), Box::new(to_nnf(b))),
        Node::Release(a, b) => Node::Release(Box::new(to_nnf(a)), Box::new(to_nnf(b))),
        Node::Next(a) => Node::Next(Box::new(to_nnf(a))),
        Node::WeakNext(a) => Node::WeakNext(Box::new(to_nnf(a))),
        Node::Always(a) => Node::Always(Box::new(to_nnf(a))),
        Node::Finally(a) => Node::Finally(Box::new(to_nnf(a))),
    };
    Formula { node, label: f.label.clone() }
}

/// NNF of `!f`.
fn negate(f: &Formula) -> Formula {
    let neg = |x: &Formula| Box::new(negate(x));
    let node = match &f.node {
        Node::Atom(_) => Node::Not(Box::new(Formula { node: f.node.clone(), label: None })),
        Node::Not(inner) => return relabel(to_nnf(inner), &f.label),
        Node::And(a, b) => Node::Or(neg(a), neg(b)),
        Node::Or(a, b) => Node::And(neg(a), neg(b)),
        Node::Always(a) => Node::Finally(neg(a)),
        Node::Finally(a) => Node::Always(neg(a)),
        Node::Next(a) => Node::WeakNext(neg(a)),
        Node::WeakNext(a) => Node::Next(neg(a)),
        Node::Until(a, b) => Node::Release(neg(a), neg(b)),
        Node::Release(a, b) => Node::Until(neg(a), neg(b)),
    };
    Formula { node, label: f.label.clone() }
}

pub fn is_nnf(f: &Formula) -> bool {
    let mut ok = true;
    f.visit(&mut |n| {
        if let Node::Not(inner) = &n.node {
            if !matches!(inner.node, Node::Atom(_)) {
                ok = false;
            }
        }
    });
    ok
}
