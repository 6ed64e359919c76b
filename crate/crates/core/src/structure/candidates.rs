use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Result, RlrError};
use crate::schema::{
    classify_variables, is_targeted_chain, AttributeRange, Formula, Literal, Role, Schema,
    TargetSpec, FALSE_VALUE, TRUE_VALUE,
};

/// Knobs for candidate generation.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOptions {
    /// Also generate `b(x)=false` for boolean attributes.
    pub include_negated_booleans: bool,
    /// Fail once more distinct candidates than this are produced.
    pub cap: usize,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions {
            include_negated_booleans: false,
            cap: 100_000,
        }
    }
}

/// Binary-literal skeleton together with the variables it binds. The
/// empty skeleton binds only the target variable.
#[derive(Debug, Clone)]
struct Skeleton {
    literals: Vec<Literal>,
    vars: BTreeMap<String, String>,
}

/// Whether `f` has a hanging variable. A hanging variable that shares a
/// binary literal with the target is tolerated: `rated(u,m)` counts what
/// `u` rated and is the simplest informative relational feature.
pub fn has_hanging_variable(f: &Formula, target: &TargetSpec) -> bool {
    classify_variables(f, target).iter().any(|(v, roles)| {
        roles.contains(&Role::Hanging)
            && !f.binary_literals().any(|l| {
                let vs = l.vars();
                vs.contains(&v.as_str()) && vs.contains(&target.var.as_str())
            })
    })
}

/// Two equality literals on the same attribute and variable.
pub fn is_contradictory(f: &Formula) -> bool {
    let mut seen = BTreeSet::new();
    f.literals().iter().any(|l| match l {
        Literal::Equals { attribute, var, .. } => !seen.insert((attribute.as_str(), var.as_str())),
        _ => false,
    })
}

/// Whether `f` is a formula the generator may emit: a targeted chain,
/// no disallowed hanging variable, no contradiction, and no use of the
/// predicted attribute.
pub fn is_allowed(f: &Formula, target: &TargetSpec) -> bool {
    f.is_true()
        || (is_targeted_chain(f, target)
            && !has_hanging_variable(f, target)
            && !is_contradictory(f)
            && !f.mentions(&target.attribute)
            && f.population_of(&target.var) == Some(target.population.as_str()))
}

fn skeletons(schema: &Schema, target: &TargetSpec, k: usize) -> Result<Vec<Skeleton>> {
    let root = Skeleton {
        literals: Vec::new(),
        vars: [(target.var.clone(), target.population.clone())].into(),
    };
    let mut all = vec![root.clone()];
    let mut seen: BTreeSet<Formula> = BTreeSet::new();
    let mut frontier = vec![root];
    for _ in 0..k {
        let mut next = Vec::new();
        for sk in &frontier {
            let fresh = format!("v{}'", sk.vars.len());
            for rel in schema.relations() {
                let [p1, p2] = &rel.populations;
                let mut pairs: Vec<(String, String)> = Vec::new();
                for (x, px) in &sk.vars {
                    if px == p1 {
                        for (y, py) in &sk.vars {
                            if py == p2 {
                                pairs.push((x.clone(), y.clone()));
                            }
                        }
                        pairs.push((x.clone(), fresh.clone()));
                    }
                    if px == p2 {
                        pairs.push((fresh.clone(), x.clone()));
                    }
                }
                for (a, b) in pairs {
                    let lit = Literal::relation(&rel.name, &a, &b);
                    if sk.literals.contains(&lit) {
                        continue;
                    }
                    let mut lits = sk.literals.clone();
                    lits.push(lit);
                    let f = Formula::from_literals(lits, schema)?.canonical(target);
                    if seen.insert(f.clone()) {
                        let sk = Skeleton {
                            literals: f.literals().to_vec(),
                            vars: f.vars().clone(),
                        };
                        next.push(sk);
                    }
                }
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(all)
}

/// Every unary literal the generator may attach to a variable of `pop`.
pub(crate) fn unary_options(
    schema: &Schema,
    target: &TargetSpec,
    var: &str,
    pop: &str,
    opts: &CandidateOptions,
) -> Vec<Literal> {
    let mut out = Vec::new();
    for a in schema
        .attributes()
        .iter()
        .filter(|a| a.population == pop && a.name != target.attribute)
    {
        match &a.range {
            AttributeRange::Boolean => {
                out.push(Literal::equals(&a.name, var, TRUE_VALUE));
                if opts.include_negated_booleans {
                    out.push(Literal::equals(&a.name, var, FALSE_VALUE));
                }
            }
            AttributeRange::Categorical(values) => {
                out.extend(values.iter().map(|v| Literal::equals(&a.name, var, v)));
            }
            AttributeRange::Continuous => out.push(Literal::continuous(&a.name, var)),
        }
    }
    out
}

fn combinations(
    n: usize,
    size: usize,
    mut visit: impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if size > n {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        visit(&idx)?;
        let mut i = size;
        while i > 0 && idx[i - 1] == n - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return Ok(());
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Allowed formulae with at most `k` binary literals and between `r_min`
/// and `r_max` unary literals, canonical and deduplicated.
pub(crate) fn generate_range(
    schema: &Schema,
    target: &TargetSpec,
    k: usize,
    r_min: usize,
    r_max: usize,
    opts: &CandidateOptions,
) -> Result<BTreeSet<Formula>> {
    let mut out = BTreeSet::new();
    let mut visited = 0usize;
    for sk in skeletons(schema, target, k)? {
        let options: Vec<Literal> = sk
            .vars
            .iter()
            .flat_map(|(v, p)| unary_options(schema, target, v, p, opts))
            .collect();
        for size in r_min..=r_max.min(options.len()) {
            combinations(options.len(), size, |pick| {
                visited += 1;
                if visited > opts.cap.saturating_mul(16) {
                    return Err(RlrError::CandidateLimit {
                        count: visited,
                        cap: opts.cap,
                    });
                }
                let mut lits = sk.literals.clone();
                lits.extend(pick.iter().map(|&i| options[i].clone()));
                if lits.is_empty() {
                    return Ok(());
                }
                let f = Formula::from_literals(lits, schema)?;
                if is_allowed(&f, target) {
                    out.insert(f.canonical(target));
                    if out.len() > opts.cap {
                        return Err(RlrError::CandidateLimit {
                            count: out.len(),
                            cap: opts.cap,
                        });
                    }
                }
                Ok(())
            })?;
        }
    }
    if r_min == 0 {
        out.insert(Formula::truth());
    }
    Ok(out)
}

/// All allowed formulae with at most `k` binary and `r` unary literals,
/// always including `True`.
pub fn generate_candidates(
    schema: &Schema,
    target: &TargetSpec,
    k: usize,
    r: usize,
    opts: &CandidateOptions,
) -> Result<BTreeSet<Formula>> {
    generate_range(schema, target, k, 0, r, opts)
}

/// The formulae with the same binary literals as `f` and a strict,
/// nonempty subset of its unary literals, canonicalized.
pub fn unary_subformulae(f: &Formula, target: &TargetSpec) -> Vec<Formula> {
    let unary: Vec<&Literal> = f.unary_literals().collect();
    let n = unary.len();
    let mut out = BTreeSet::new();
    for mask in 1..(1u64 << n).saturating_sub(1) {
        let keep: Vec<&Literal> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| unary[i])
            .collect();
        let sub = f.retain(|l| l.is_binary() || keep.contains(&l));
        out.insert(sub.canonical(target));
    }
    out.into_iter().collect()
}

/// Whether `f` obeys the hierarchical assumption: neither it nor any of
/// its unary sub-formulae has been removed.
pub fn obeys_hierarchy(f: &Formula, removed: &BTreeSet<Formula>, target: &TargetSpec) -> bool {
    !removed.contains(f)
        && unary_subformulae(f, target)
            .iter()
            .all(|g| !removed.contains(g))
}

/// The next level's working set: every formula of `current` and every
/// allowed formula with exactly `r` unary literals that obeys the
/// hierarchy with respect to `removed`.
pub fn expand_ha(
    current: &BTreeSet<Formula>,
    removed: &BTreeSet<Formula>,
    r: usize,
    schema: &Schema,
    target: &TargetSpec,
    k: usize,
    opts: &CandidateOptions,
) -> Result<BTreeSet<Formula>> {
    let mut next: BTreeSet<Formula> = current
        .iter()
        .filter(|f| obeys_hierarchy(f, removed, target))
        .cloned()
        .collect();
    for f in generate_range(schema, target, k, r, r, opts)? {
        if obeys_hierarchy(&f, removed, target) {
            next.insert(f);
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::tests::{gender_target, movie_schema};
    use crate::schema::{AttributeDecl, RelationDecl};

    fn parse(s: &str) -> Formula {
        Formula::parse(s, &movie_schema()).unwrap()
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let mut seen = Vec::new();
        combinations(4, 2, |c| {
            seen.push(c.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        let mut n = 0;
        combinations(3, 0, |_| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 1);
        combinations(2, 3, |_| panic!("no subsets")).unwrap();
    }

    #[test]
    fn trivial_level() {
        let s = movie_schema();
        let t = gender_target(&s);
        let c = generate_candidates(&s, &t, 0, 0, &CandidateOptions::default()).unwrap();
        assert_eq!(c.into_iter().collect::<Vec<_>>(), vec![Formula::truth()]);
    }

    #[test]
    fn movie_level_one() {
        let s = movie_schema();
        let t = gender_target(&s);
        let c = generate_candidates(&s, &t, 1, 1, &CandidateOptions::default()).unwrap();
        let has = |x: &str| c.contains(&parse(x).canonical(&t));
        assert!(has("rated(u,m)"));
        assert!(has("rated(u,m) * drama(m)"));
        assert!(has("age(u)=young"));
        assert!(!has("drama(m) * comedy(m)"));
        assert!(!c.iter().any(|f| f.mentions("gender")));
        // True, two ages, rated, and rated with each of four unary literals
        assert_eq!(c.len(), 8);
    }

    #[test]
    fn contradictions_are_pruned() {
        let s = movie_schema();
        let t = gender_target(&s);
        let c = generate_candidates(&s, &t, 0, 2, &CandidateOptions::default()).unwrap();
        assert!(!c.iter().any(is_contradictory));
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn hanging_variables() {
        let mut s = movie_schema();
        s.add_population("actor").unwrap();
        s.add_relation(RelationDecl {
            name: "acted".into(),
            populations: ["actor".into(), "movie".into()],
        })
        .unwrap();
        let t = gender_target(&s);
        let p = |x: &str| Formula::parse(x, &s).unwrap();
        assert!(has_hanging_variable(&p("rated(u,m) * acted(a,m)"), &t));
        assert!(!has_hanging_variable(&p("rated(u,m)"), &t));
        assert!(has_hanging_variable(
            &p("rated(u,m) * rated(v,m) * rated(v,n)"),
            &t
        ));
        let c = generate_candidates(&s, &t, 2, 1, &CandidateOptions::default()).unwrap();
        assert!(!c.contains(&p("rated(u,m) * acted(a,m)").canonical(&t)));
    }

    #[test]
    fn psi_members() {
        let s = movie_schema();
        let t = gender_target(&s);
        let f = parse("rated(u,m) * drama(m) * comedy(m)");
        let subs = unary_subformulae(&f, &t);
        assert_eq!(subs.len(), 2);
        assert!(subs.contains(&parse("rated(u,m) * drama(m)").canonical(&t)));
        assert!(subs.contains(&parse("rated(u,m) * comedy(m)").canonical(&t)));
        assert!(unary_subformulae(&parse("rated(u,m) * drama(m)"), &t).is_empty());
    }

    #[test]
    fn expansion_respects_removed() {
        let s = movie_schema();
        let t = gender_target(&s);
        let opts = CandidateOptions::default();
        let cur = generate_candidates(&s, &t, 1, 1, &opts).unwrap();
        let removed: BTreeSet<Formula> = [parse("rated(u,m) * drama(m)").canonical(&t)].into();
        let next = expand_ha(&cur, &removed, 2, &s, &t, 1, &opts).unwrap();
        assert!(!next.contains(&parse("rated(u,m) * drama(m) * comedy(m)").canonical(&t)));
        assert!(next.contains(&parse("rated(u,m) * comedy(m) * age(u)=old").canonical(&t)));
        assert!(!next.iter().any(|f| removed.contains(f)));
        for f in &next {
            assert!(obeys_hierarchy(f, &removed, &t));
        }
        // with nothing removed the exact level equals the filtered enumeration
        let all2 = generate_candidates(&s, &t, 1, 2, &opts).unwrap();
        let open = expand_ha(&cur, &BTreeSet::new(), 2, &s, &t, 1, &opts).unwrap();
        assert_eq!(open, all2);
    }

    #[test]
    fn cap_is_enforced() {
        let mut s = Schema::new();
        s.add_population("p").unwrap();
        s.add_attribute(AttributeDecl {
            name: "y".into(),
            population: "p".into(),
            range: AttributeRange::Boolean,
        })
        .unwrap();
        for i in 0..30 {
            s.add_attribute(AttributeDecl {
                name: format!("a{i}"),
                population: "p".into(),
                range: AttributeRange::Boolean,
            })
            .unwrap();
        }
        let t = TargetSpec::new(&s, "y", "x", "true").unwrap();
        let opts = CandidateOptions {
            cap: 100,
            ..CandidateOptions::default()
        };
        let err = generate_candidates(&s, &t, 0, 3, &opts).unwrap_err();
        assert!(matches!(err, RlrError::CandidateLimit { .. }));
    }
}
