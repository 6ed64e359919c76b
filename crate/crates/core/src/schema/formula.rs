use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{AttributeRange, Schema, TargetSpec, TRUE_VALUE};
use crate::error::{Result, RlrError};

/// An assignment of a value to a parametrized random variable.
///
/// Relation literals are positive only; negation of a boolean attribute is
/// written as the equality `a(x)=false`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Relation {
        name: String,
        args: [String; 2],
    },
    Equals {
        attribute: String,
        var: String,
        value: String,
    },
    Continuous {
        attribute: String,
        var: String,
    },
}

impl Literal {
    pub fn relation(name: &str, a: &str, b: &str) -> Self {
        Literal::Relation {
            name: name.to_string(),
            args: [a.to_string(), b.to_string()],
        }
    }

    pub fn equals(attribute: &str, var: &str, value: &str) -> Self {
        Literal::Equals {
            attribute: attribute.to_string(),
            var: var.to_string(),
            value: value.to_string(),
        }
    }

    pub fn continuous(attribute: &str, var: &str) -> Self {
        Literal::Continuous {
            attribute: attribute.to_string(),
            var: var.to_string(),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Literal::Relation { .. })
    }

    pub fn is_unary(&self) -> bool {
        !self.is_binary()
    }

    /// Declaration name (relation or attribute).
    pub fn symbol(&self) -> &str {
        match self {
            Literal::Relation { name, .. } => name,
            Literal::Equals { attribute, .. } | Literal::Continuous { attribute, .. } => attribute,
        }
    }

    pub fn vars(&self) -> Vec<&str> {
        match self {
            Literal::Relation { args, .. } => vec![&args[0], &args[1]],
            Literal::Equals { var, .. } | Literal::Continuous { var, .. } => vec![var],
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Literal::Relation { .. } => 0,
            Literal::Equals { .. } => 1,
            Literal::Continuous { .. } => 2,
        }
    }

    fn value(&self) -> &str {
        match self {
            Literal::Equals { value, .. } => value,
            _ => "",
        }
    }

    fn renamed(&self, map: &HashMap<&str, String>) -> Literal {
        let r = |v: &String| map.get(v.as_str()).cloned().unwrap_or_else(|| v.clone());
        match self {
            Literal::Relation { name, args } => Literal::Relation {
                name: name.clone(),
                args: [r(&args[0]), r(&args[1])],
            },
            Literal::Equals {
                attribute,
                var,
                value,
            } => Literal::Equals {
                attribute: attribute.clone(),
                var: r(var),
                value: value.clone(),
            },
            Literal::Continuous { attribute, var } => Literal::Continuous {
                attribute: attribute.clone(),
                var: r(var),
            },
        }
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.kind_rank(), self.symbol(), self.value(), self.vars()).cmp(&(
            other.kind_rank(),
            other.symbol(),
            other.value(),
            other.vars(),
        ))
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Relation { name, args } => write!(f, "{name}({},{})", args[0], args[1]),
            Literal::Equals {
                attribute,
                var,
                value,
            } if value == TRUE_VALUE => {
                write!(f, "{attribute}({var})")
            }
            Literal::Equals {
                attribute,
                var,
                value,
            } => write!(f, "{attribute}({var})={value}"),
            Literal::Continuous { attribute, var } => write!(f, "{attribute}({var})"),
        }
    }
}

/// A conjunction of literals. The empty conjunction is `True`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Formula {
    literals: Vec<Literal>,
    vars: BTreeMap<String, String>,
}

/// Above this many renamings canonicalization falls back to the
/// sort-and-rename fixpoint instead of searching every renaming.
const EXHAUSTIVE_RENAMING_LIMIT: usize = 40_320;

impl Formula {
    pub fn truth() -> Self {
        Formula {
            literals: Vec::new(),
            vars: BTreeMap::new(),
        }
    }

    /// Builds a formula, inferring each logical variable's population from
    /// the declarations it appears in.
    pub fn from_literals(literals: Vec<Literal>, schema: &Schema) -> Result<Self> {
        let mut vars: BTreeMap<String, String> = BTreeMap::new();
        let mut bind = |var: &str, pop: &str, lit: &Literal| -> Result<()> {
            if !super::is_identifier(var) {
                return Err(RlrError::validation(format!(
                    "`{var}` is not a valid logical variable"
                )));
            }
            match vars.get(var) {
                Some(existing) if existing != pop => Err(RlrError::validation(format!(
                    "logical variable `{var}` used for population `{existing}` and `{pop}` (in `{lit}`)"
                ))),
                Some(_) => Ok(()),
                None => {
                    vars.insert(var.to_string(), pop.to_string());
                    Ok(())
                }
            }
        };
        for lit in &literals {
            match lit {
                Literal::Relation { name, args } => {
                    let decl = schema.relation(name).ok_or_else(|| {
                        RlrError::validation(format!("undeclared relation `{name}`"))
                    })?;
                    bind(&args[0], &decl.populations[0], lit)?;
                    bind(&args[1], &decl.populations[1], lit)?;
                }
                Literal::Equals {
                    attribute,
                    var,
                    value,
                } => {
                    let decl = schema.attribute(attribute).ok_or_else(|| {
                        RlrError::validation(format!("undeclared attribute `{attribute}`"))
                    })?;
                    if !decl.range.contains(value) {
                        return Err(RlrError::validation(format!(
                            "`{value}` is not in the range of `{attribute}`"
                        )));
                    }
                    bind(var, &decl.population, lit)?;
                }
                Literal::Continuous { attribute, var } => {
                    let decl = schema.attribute(attribute).ok_or_else(|| {
                        RlrError::validation(format!("undeclared attribute `{attribute}`"))
                    })?;
                    if decl.range != AttributeRange::Continuous {
                        return Err(RlrError::validation(format!(
                            "`{attribute}` is not continuous; write `{attribute}({var})=<value>`"
                        )));
                    }
                    bind(var, &decl.population, lit)?;
                }
            }
        }
        let mut literals = literals;
        literals.sort();
        literals.dedup();
        Ok(Formula { literals, vars })
    }

    pub fn parse(text: &str, schema: &Schema) -> Result<Self> {
        super::parse::parse_formula(text, schema)
    }

    pub fn is_true(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    /// Logical variables and their populations.
    pub fn vars(&self) -> &BTreeMap<String, String> {
        &self.vars
    }

    pub fn population_of(&self, var: &str) -> Option<&str> {
        self.vars.get(var).map(String::as_str)
    }

    pub fn binary_literals(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter().filter(|l| l.is_binary())
    }

    pub fn unary_literals(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter().filter(|l| l.is_unary())
    }

    pub fn mentions(&self, symbol: &str) -> bool {
        self.literals.iter().any(|l| l.symbol() == symbol)
    }

    /// Conjunction with one more literal.
    pub fn and(&self, lit: Literal, schema: &Schema) -> Result<Self> {
        let mut lits = self.literals.clone();
        lits.push(lit);
        Formula::from_literals(lits, schema)
    }

    /// Sub-formula keeping only the literals selected by `keep`; the
    /// variables are restricted to those still mentioned.
    pub fn retain(&self, mut keep: impl FnMut(&Literal) -> bool) -> Self {
        let literals: Vec<Literal> = self.literals.iter().filter(|l| keep(l)).cloned().collect();
        let used: BTreeSet<&str> = literals.iter().flat_map(|l| l.vars()).collect();
        let vars = self
            .vars
            .iter()
            .filter(|(v, _)| used.contains(v.as_str()))
            .map(|(v, p)| (v.clone(), p.clone()))
            .collect();
        Formula { literals, vars }
    }

    /// Canonical form with respect to the target's logical variable.
    pub fn canonical(&self, target: &TargetSpec) -> Self {
        self.canonicalize(&[target.var.as_str()])
    }

    /// Normal form under literal reordering and bijective renaming of every
    /// logical variable not in `fixed`.
    ///
    /// Non-fixed variables get names `<population prefix><n>`. The smallest
    /// sorted literal list over all population-preserving renamings is
    /// chosen; formulae with too many free variables fall back to iterating
    /// sort-then-rename until stable.
    pub fn canonicalize(&self, fixed: &[&str]) -> Self {
        let free: Vec<&str> = self
            .vars
            .keys()
            .map(String::as_str)
            .filter(|v| !fixed.contains(v))
            .collect();
        if free.is_empty() {
            return self.clone();
        }
        let names = canonical_names(&self.vars, &free, fixed);

        // group free variables by population, keeping name order
        let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for v in &free {
            groups.entry(self.vars[*v].as_str()).or_default().push(v);
        }
        let renamings: usize = groups
            .values()
            .map(|g| (1..=g.len()).product::<usize>())
            .fold(1usize, |acc, n| acc.saturating_mul(n));

        let (literals, map) = if renamings <= EXHAUSTIVE_RENAMING_LIMIT {
            let group_list: Vec<(&str, Vec<&str>)> = groups.into_iter().collect();
            let mut best: Option<(Vec<Literal>, HashMap<&str, String>)> = None;
            let mut choice: Vec<Vec<usize>> = Vec::new();
            search_renamings(&group_list, &names, &self.literals, &mut choice, &mut best);
            best.expect("at least one renaming")
        } else {
            self.fixpoint_literals(&free, &names)
        };
        let vars = self
            .vars
            .iter()
            .map(|(v, p)| {
                (
                    map.get(v.as_str()).cloned().unwrap_or_else(|| v.clone()),
                    p.clone(),
                )
            })
            .collect();
        Formula { literals, vars }
    }

    fn fixpoint_literals<'a>(
        &'a self,
        free: &[&'a str],
        names: &BTreeMap<&str, Vec<String>>,
    ) -> (Vec<Literal>, HashMap<&'a str, String>) {
        // original name -> current name
        let mut total: HashMap<&str, String> = free.iter().map(|v| (*v, v.to_string())).collect();
        let mut lits = self.literals.clone();
        lits.sort();
        for _ in 0..32 {
            let current_to_orig: HashMap<String, &str> =
                total.iter().map(|(o, c)| (c.clone(), *o)).collect();
            let mut step: HashMap<&str, String> = HashMap::new();
            let mut counters: HashMap<&str, usize> = HashMap::new();
            for lit in &lits {
                for v in lit.vars() {
                    if let Some(orig) = current_to_orig.get(v) {
                        if !step.contains_key(v) {
                            let pop = self.vars[*orig].as_str();
                            let n = counters.entry(pop).or_insert(0);
                            step.insert(v, names[pop][*n].clone());
                            *n += 1;
                        }
                    }
                }
            }
            let mut next: Vec<Literal> = lits.iter().map(|l| l.renamed(&step)).collect();
            next.sort();
            next.dedup();
            for cur in total.values_mut() {
                if let Some(new) = step.get(cur.as_str()) {
                    *cur = new.clone();
                }
            }
            if next == lits {
                break;
            }
            lits = next;
        }
        (lits, total)
    }
}

/// Canonical names per population for the free variables.
fn canonical_names<'a>(
    vars: &'a BTreeMap<String, String>,
    free: &[&str],
    fixed: &[&str],
) -> BTreeMap<&'a str, Vec<String>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in free {
        *counts.entry(vars[*v].as_str()).or_default() += 1;
    }
    let pops: Vec<&str> = counts.keys().copied().collect();
    let mut used: BTreeSet<String> = fixed.iter().map(|s| s.to_string()).collect();
    let mut out = BTreeMap::new();
    for pop in &pops {
        let prefix = population_prefix(pop, &pops);
        let mut names = Vec::new();
        let mut n = 1;
        while names.len() < counts[pop] {
            let candidate = format!("{prefix}{n}");
            n += 1;
            if used.insert(candidate.clone()) {
                names.push(candidate);
            }
        }
        out.insert(*pop, names);
    }
    out
}

/// Shortest lowercase prefix of `pop` not shared with the other populations.
fn population_prefix(pop: &str, all: &[&str]) -> String {
    let lower: String = pop
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect::<String>()
        .to_ascii_lowercase();
    let lower = if lower.is_empty() || !lower.starts_with(|c: char| c.is_ascii_alphabetic()) {
        format!("v{lower}")
    } else {
        lower
    };
    let others: Vec<String> = all
        .iter()
        .filter(|p| **p != pop)
        .map(|p| p.to_ascii_lowercase())
        .collect();
    for len in 1..=lower.len() {
        let prefix = &lower[..len];
        if !others.iter().any(|o| o.starts_with(prefix)) {
            return prefix.to_string();
        }
    }
    format!("{lower}_")
}

fn search_renamings<'a>(
    groups: &[(&'a str, Vec<&'a str>)],
    names: &BTreeMap<&str, Vec<String>>,
    literals: &[Literal],
    choice: &mut Vec<Vec<usize>>,
    best: &mut Option<(Vec<Literal>, HashMap<&'a str, String>)>,
) {
    if choice.len() == groups.len() {
        let mut map: HashMap<&'a str, String> = HashMap::new();
        for ((pop, vars), perm) in groups.iter().zip(choice.iter()) {
            for (v, slot) in vars.iter().zip(perm) {
                map.insert(v, names[pop][*slot].clone());
            }
        }
        let mut lits: Vec<Literal> = literals.iter().map(|l| l.renamed(&map)).collect();
        lits.sort();
        lits.dedup();
        if best.as_ref().is_none_or(|(b, _)| lits < *b) {
            *best = Some((lits, map));
        }
        return;
    }
    let n = groups[choice.len()].1.len();
    for perm in permutations(n) {
        choice.push(perm);
        search_renamings(groups, names, literals, choice, best);
        choice.pop();
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.literals.is_empty() {
            return write!(f, "True");
        }
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " * ")?;
            }
            write!(f, "{lit}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFormula {
    pub formula: Formula,
    pub weight: f64,
}

impl WeightedFormula {
    pub fn new(formula: Formula, weight: f64) -> Result<Self> {
        if !weight.is_finite() {
            return Err(RlrError::validation(format!(
                "weight of `{formula}` is not finite"
            )));
        }
        Ok(WeightedFormula { formula, weight })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::tests::{gender_target, movie_schema};

    fn parse(s: &str) -> Formula {
        Formula::parse(s, &movie_schema()).unwrap()
    }

    fn canon(s: &str) -> Formula {
        let schema = movie_schema();
        parse(s).canonical(&gender_target(&schema))
    }

    #[test]
    fn renaming_symmetry() {
        assert_eq!(
            canon("rated(u,m1) * drama(m1)"),
            canon("drama(m2) * rated(u,m2)")
        );
        assert_eq!(
            canon("rated(u,m) * rated(v,m)"),
            canon("rated(w,m) * rated(u,m)")
        );
        assert_ne!(
            canon("rated(u,m) * drama(m)"),
            canon("rated(u,m) * comedy(m)")
        );
    }

    #[test]
    fn target_variable_is_never_renamed() {
        let f = canon("rated(x,m) * rated(u,m)");
        assert!(f.vars().contains_key("u"));
        // swapping which variable is the target gives a different formula
        assert_ne!(
            canon("rated(u,m) * drama(m)"),
            canon("rated(x,m) * drama(m)")
        );
    }

    #[test]
    fn canonical_names_follow_population() {
        let f = canon("rated(u,a) * rated(b,a) * rated(b,c) * comedy(a)");
        assert_eq!(
            f.to_string(),
            "rated(u,m1) * rated(u1,m1) * rated(u1,m2) * comedy(m1)"
        );
        assert_eq!(f.population_of("u1"), Some("user"));
        assert_eq!(f.population_of("m2"), Some("movie"));
    }

    #[test]
    fn duplicate_literals_collapse() {
        let f = canon("rated(u,m) * drama(m) * drama(m)");
        assert_eq!(f.literals().len(), 2);
        // two renamings of the same literal collapse only after renaming
        let g = canon("rated(u,a) * rated(u,b)");
        assert_eq!(g.literals().len(), 2);
    }

    #[test]
    fn population_mismatch_is_rejected() {
        let schema = movie_schema();
        let err = Formula::from_literals(
            vec![
                Literal::relation("rated", "u", "m"),
                Literal::equals("age", "m", "young"),
            ],
            &schema,
        );
        assert!(err.is_err());
        assert!(Formula::parse("drama(m)=maybe", &schema).is_err());
    }

    #[test]
    fn prefixes_disambiguate_populations() {
        assert_eq!(population_prefix("user", &["user", "movie"]), "u");
        assert_eq!(
            population_prefix("movie", &["user", "movie", "mouse"]),
            "mov"
        );
    }

    #[test]
    fn weighted_formula_rejects_non_finite() {
        assert!(WeightedFormula::new(Formula::truth(), f64::NAN).is_err());
        assert!(WeightedFormula::new(Formula::truth(), -4.5).is_ok());
    }
}
