use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::model::RlrModel;
use crate::schema::{
    AttributeDecl, AttributeRange, Formula, RelationDecl, Schema, TargetSpec, WeightedFormula,
};

/// How a non-target attribute is drawn, independently per individual.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeGen {
    /// Boolean, true with the given probability.
    Bernoulli(f64),
    /// Categorical, uniform over the listed values.
    Uniform(Vec<String>),
    /// Continuous Gaussian.
    Normal { mean: f64, sd: f64 },
    /// Continuous, -1 or +1 with equal probability.
    Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpecGen {
    pub name: String,
    pub population: String,
    pub gen: AttributeGen,
    /// Used while generating labels but left out of the output database.
    pub latent: bool,
}

/// Each ordered pair is linked with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationGen {
    pub name: String,
    pub populations: [String; 2],
    pub p: f64,
    pub allow_self: bool,
}

/// A generative RLR model over randomly drawn populations, attributes and
/// relations. The target is Boolean; its labels are drawn from the
/// sigmoid of the weighted formula counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub populations: Vec<(String, usize)>,
    pub attributes: Vec<AttributeSpecGen>,
    pub relations: Vec<RelationGen>,
    pub target_attribute: String,
    pub target_population: String,
    pub target_var: String,
    /// `(formula, weight)`; formulas are parsed against the full schema,
    /// latent attributes included.
    pub formulas: Vec<(String, f64)>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub db: RelationalDatabase,
    pub target: TargetSpec,
    /// Label probability of every target individual.
    pub probabilities: Vec<f64>,
}

impl SyntheticSpec {
    /// People with about nine friends each, a fair coin for `kind`, and
    /// `happy(z)` driven by the number of kind friends.
    pub fn friends(n: usize, seed: u64) -> Self {
        let person = || "person".to_string();
        SyntheticSpec {
            populations: vec![(person(), n)],
            attributes: vec![AttributeSpecGen {
                name: "kind".into(),
                population: person(),
                gen: AttributeGen::Bernoulli(0.5),
                latent: false,
            }],
            relations: vec![RelationGen {
                name: "friend".into(),
                populations: [person(), person()],
                p: if n > 1 {
                    (9.0 / (n - 1) as f64).min(1.0)
                } else {
                    0.0
                },
                allow_self: false,
            }],
            target_attribute: "happy".into(),
            target_population: person(),
            target_var: "z".into(),
            formulas: vec![("True".into(), -4.5), ("friend(z,y) * kind(y)".into(), 1.0)],
            seed,
        }
    }

    /// Users rate random movies; each movie carries an unobserved +-1 value
    /// and `gender(u)` depends on the sum of it over the rated movies. The
    /// movies also carry an observed but irrelevant `drama` flag.
    pub fn planted_latent(users: usize, movies: usize, seed: u64) -> Self {
        SyntheticSpec {
            populations: vec![("user".into(), users), ("movie".into(), movies)],
            attributes: vec![
                AttributeSpecGen {
                    name: "latent".into(),
                    population: "movie".into(),
                    gen: AttributeGen::Sign,
                    latent: true,
                },
                AttributeSpecGen {
                    name: "drama".into(),
                    population: "movie".into(),
                    gen: AttributeGen::Bernoulli(0.5),
                    latent: false,
                },
            ],
            relations: vec![RelationGen {
                name: "rated".into(),
                populations: ["user".into(), "movie".into()],
                p: (15.0 / movies.max(1) as f64).min(1.0),
                allow_self: true,
            }],
            target_attribute: "gender".into(),
            target_population: "user".into(),
            target_var: "u".into(),
            formulas: vec![("True".into(), 0.0), ("rated(u,m) * latent(m)".into(), 0.8)],
            seed,
        }
    }

    fn schema(&self, with_latent: bool) -> Result<Schema> {
        let mut s = Schema::new();
        for (p, _) in &self.populations {
            s.add_population(p)?;
        }
        for a in self.attributes.iter().filter(|a| with_latent || !a.latent) {
            let range = match &a.gen {
                AttributeGen::Bernoulli(_) => AttributeRange::Boolean,
                AttributeGen::Uniform(v) => AttributeRange::Categorical(v.clone()),
                AttributeGen::Normal { .. } | AttributeGen::Sign => AttributeRange::Continuous,
            };
            s.add_attribute(AttributeDecl {
                name: a.name.clone(),
                population: a.population.clone(),
                range,
            })?;
        }
        s.add_attribute(AttributeDecl {
            name: self.target_attribute.clone(),
            population: self.target_population.clone(),
            range: AttributeRange::Boolean,
        })?;
        for r in &self.relations {
            s.add_relation(RelationDecl {
                name: r.name.clone(),
                populations: r.populations.clone(),
            })?;
        }
        Ok(s)
    }

    fn size(&self, pop: &str) -> Result<usize> {
        self.populations
            .iter()
            .find(|(p, _)| p == pop)
            .map(|(_, n)| *n)
            .ok_or_else(|| RlrError::Config(format!("unknown population `{pop}`")))
    }
}

enum Drawn {
    Discrete(Vec<String>),
    Continuous(Vec<f64>),
}

fn assemble(
    spec: &SyntheticSpec,
    with_latent: bool,
    drawn: &[Drawn],
    relations: &[Vec<(usize, usize)>],
    labels: &[Option<&str>],
) -> Result<RelationalDatabase> {
    let mut b = RelationalDatabase::builder(spec.schema(with_latent)?);
    for (p, n) in &spec.populations {
        b = b.anonymous_population(p, *n)?;
    }
    for (a, d) in spec.attributes.iter().zip(drawn) {
        if a.latent && !with_latent {
            continue;
        }
        b = match d {
            Drawn::Discrete(v) => {
                let v: Vec<Option<&str>> = v.iter().map(|s| Some(s.as_str())).collect();
                b.discrete(&a.name, &v)?
            }
            Drawn::Continuous(v) => b.continuous(&a.name, v.clone())?,
        };
    }
    b = b.discrete(&spec.target_attribute, labels)?;
    for (r, pairs) in spec.relations.iter().zip(relations) {
        b = b.relation(&r.name, pairs.clone())?;
    }
    b.build()
}

/// Draws a database from `spec`. Labels are Bernoulli draws from the RLR
/// probability of each target individual.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut drawn = Vec::new();
    for a in &spec.attributes {
        let n = spec.size(&a.population)?;
        drawn.push(match &a.gen {
            AttributeGen::Bernoulli(p) => {
                if !(0.0..=1.0).contains(p) {
                    return Err(RlrError::Config(format!(
                        "probability {p} for `{}`",
                        a.name
                    )));
                }
                Drawn::Discrete((0..n).map(|_| rng.gen_bool(*p).to_string()).collect())
            }
            AttributeGen::Uniform(values) => {
                if values.is_empty() {
                    return Err(RlrError::Config(format!("`{}` has no values", a.name)));
                }
                Drawn::Discrete(
                    (0..n)
                        .map(|_| values[rng.gen_range(0..values.len())].clone())
                        .collect(),
                )
            }
            AttributeGen::Normal { mean, sd } => {
                let d = Normal::new(*mean, *sd)
                    .map_err(|e| RlrError::Config(format!("`{}`: {e}", a.name)))?;
                Drawn::Continuous((0..n).map(|_| d.sample(&mut rng)).collect())
            }
            AttributeGen::Sign => Drawn::Continuous(
                (0..n)
                    .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                    .collect(),
            ),
        });
    }
    let mut relations = Vec::new();
    for r in &spec.relations {
        if !(0.0..=1.0).contains(&r.p) {
            return Err(RlrError::Config(format!(
                "link probability {} for `{}`",
                r.p, r.name
            )));
        }
        let (na, nb) = (spec.size(&r.populations[0])?, spec.size(&r.populations[1])?);
        let same = r.populations[0] == r.populations[1];
        let mut pairs = Vec::new();
        for a in 0..na {
            for b in 0..nb {
                if same && a == b && !r.allow_self {
                    continue;
                }
                if rng.gen_bool(r.p) {
                    pairs.push((a, b));
                }
            }
        }
        relations.push(pairs);
    }
    let n = spec.size(&spec.target_population)?;
    let full = assemble(spec, true, &drawn, &relations, &vec![None; n])?;
    let target = TargetSpec::new(
        full.schema(),
        &spec.target_attribute,
        &spec.target_var,
        "true",
    )?;
    let formulas = spec
        .formulas
        .iter()
        .map(|(text, w)| {
            WeightedFormula::new(Formula::parse(text, full.schema())?.canonical(&target), *w)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = RlrModel::new(formulas, target.clone(), 0.5, 0.0)?;
    let probabilities = model.rlr_predict_all(&full);
    let labels: Vec<Option<&str>> = probabilities
        .iter()
        .map(|&p| Some(if rng.gen_bool(p) { "true" } else { "false" }))
        .collect();
    let db = assemble(spec, false, &drawn, &relations, &labels)?;
    Ok(SyntheticData {
        db,
        target,
        probabilities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friends_database_shape() {
        let d = generate_synthetic(&SyntheticSpec::friends(200, 3)).unwrap();
        let friends = d.db.relation("friend").unwrap();
        let mean_degree = friends.len() as f64 / 200.0;
        assert!((mean_degree - 9.0).abs() < 1.0, "{mean_degree}");
        assert!(friends.pairs().all(|(a, b)| a != b));
        assert_eq!(d.probabilities.len(), 200);
        let kind = |i: usize| d.db.discrete_value("kind", i) == Some("true");
        let k0 = friends
            .successors(0)
            .iter()
            .filter(|&&j| kind(j as usize))
            .count() as f64;
        let expect = 1.0 / (1.0 + (4.5 - k0).exp());
        assert!((d.probabilities[0] - expect).abs() < 1e-12);
        let again = generate_synthetic(&SyntheticSpec::friends(200, 3)).unwrap();
        assert_eq!(d.db.labels(&d.target), again.db.labels(&again.target));
    }

    #[test]
    fn latent_attribute_is_dropped() {
        let d = generate_synthetic(&SyntheticSpec::planted_latent(50, 40, 1)).unwrap();
        assert!(d.db.schema().attribute("latent").is_none());
        assert!(d.db.schema().attribute("drama").is_some());
        assert!(d.db.labels(&d.target).iter().all(Option::is_some));
        assert!(d.probabilities.iter().any(|&p| (p - 0.5).abs() > 0.1));
    }

    #[test]
    fn rejects_bad_probability() {
        let mut s = SyntheticSpec::friends(5, 0);
        s.relations[0].p = 1.5;
        assert!(generate_synthetic(&s).is_err());
    }
}
