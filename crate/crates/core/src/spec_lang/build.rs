use super::ast::{Atom, Formula, Specification};
use super::SpecError;

/// `exists vars. F((pre)@pre & F((post)@post))`
pub fn build_pre_post_spec(
    pre: Formula,
    post: Formula,
    vars: Vec<String>,
) -> Result<Specification, SpecError> {
    if pre.is_temporal() || post.is_temporal() {
        return Err(SpecError::TemporalOperatorInCondition);
    }
    let body = Formula::finally(Formula::and(
        pre.labeled("pre"),
        Formula::finally(post.labeled("post")),
    ));
    Specification::new(vars, body)
}

/// `a1 U (a2 U (... U an))` with each atom labeled `act_i` (1-based).
pub fn build_action_chain_spec(actions: Vec<Atom>) -> Result<Specification, SpecError> {
    if actions.is_empty() {
        return Err(SpecError::EmptyActionList);
    }
    let mut vars: Vec<String> = Vec::new();
    for a in &actions {
        for v in a.vars() {
            if !vars.iter().any(|x| x == v) {
                vars.push(v.to_string());
            }
        }
    }
    let mut labeled: Vec<Formula> = actions
        .into_iter()
        .enumerate()
        .map(|(i, a)| Formula::atom(a).labeled(&format!("act_{}", i + 1)))
        .collect();
    let last = labeled.pop().expect("nonempty");
    let body = labeled.into_iter().rev().fold(last, |acc, f| Formula::until(f, acc));
    Specification::new(vars, body)
}
