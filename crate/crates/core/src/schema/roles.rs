use std::collections::{BTreeMap, BTreeSet};

use super::{Formula, TargetSpec};

/// Role of a logical variable inside a formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    /// One of the variables of the predicted PRV.
    Target,
    /// Appears in two binary literals, each linking it to another variable.
    Connector,
    /// Some literal mentions this variable and nothing else.
    Attributed,
    /// None of the above.
    Hanging,
}

/// Assigns every role each variable satisfies; `Hanging` only when no other
/// role applies.
pub fn classify_variables(f: &Formula, target: &TargetSpec) -> BTreeMap<String, BTreeSet<Role>> {
    let mut roles = BTreeMap::new();
    for var in f.vars().keys() {
        let mut set = BTreeSet::new();
        if *var == target.var {
            set.insert(Role::Target);
        }
        let linking = f
            .binary_literals()
            .filter(|l| {
                let vs = l.vars();
                vs.contains(&var.as_str()) && vs.iter().any(|v| v != var)
            })
            .count();
        if linking >= 2 {
            set.insert(Role::Connector);
        }
        if f.literals()
            .iter()
            .any(|l| l.vars().iter().all(|v| v == var))
        {
            set.insert(Role::Attributed);
        }
        if set.is_empty() {
            set.insert(Role::Hanging);
        }
        roles.insert(var.clone(), set);
    }
    roles
}

/// Whether the literals can be ordered so each shares a variable with an
/// earlier one. Such an ordering exists iff the literal/variable incidence
/// graph is connected, so a greedy sweep decides it.
pub fn is_chain(f: &Formula) -> bool {
    let lits = f.literals();
    if lits.len() <= 1 {
        return true;
    }
    let mut placed = vec![false; lits.len()];
    placed[0] = true;
    let mut seen: BTreeSet<&str> = lits[0].vars().into_iter().collect();
    let mut progress = true;
    while progress {
        progress = false;
        for (i, lit) in lits.iter().enumerate() {
            if !placed[i] && lit.vars().iter().any(|v| seen.contains(v)) {
                placed[i] = true;
                seen.extend(lit.vars());
                progress = true;
            }
        }
    }
    placed.iter().all(|p| *p)
}

/// A chain that mentions the target variable. `True` counts as targeted: it
/// is the intercept.
pub fn is_targeted_chain(f: &Formula, target: &TargetSpec) -> bool {
    if f.is_true() {
        return true;
    }
    f.vars().contains_key(&target.var) && is_chain(f)
}

/// `(binary literals, unary literals)`.
pub fn literal_counts(f: &Formula) -> (usize, usize) {
    let binary = f.binary_literals().count();
    (binary, f.literals().len() - binary)
}
