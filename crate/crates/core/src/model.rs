//! A learned RLR model: weighted formulae, the target, mean regularization
//! and any learned hidden attributes, with a line-oriented text format.

use std::fmt::Write as _;
use std::path::Path;

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::grounding::{count_column, count_formula, FeatureCache};
use crate::lr::sigmoid;
use crate::schema::{AttributeDecl, AttributeRange, Formula, Schema, TargetSpec, WeightedFormula};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "rlr-model";

/// Learned values of one hidden continuous attribute, keyed by individual id.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenValues {
    pub name: String,
    pub population: String,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

impl HiddenValues {
    /// Reads the attribute's current values out of `db`.
    pub fn from_database(db: &RelationalDatabase, name: &str) -> Result<Self> {
        let decl = db
            .schema()
            .attribute(name)
            .ok_or_else(|| RlrError::validation(format!("unknown attribute `{name}`")))?;
        let values = db
            .continuous_values(name)
            .ok_or_else(|| RlrError::validation(format!("`{name}` is not continuous")))?
            .to_vec();
        let ids = db
            .population(&decl.population)
            .expect("declared population")
            .individuals()
            .to_vec();
        Ok(HiddenValues {
            name: name.to_string(),
            population: decl.population.clone(),
            ids,
            values,
        })
    }

    fn decl(&self) -> AttributeDecl {
        AttributeDecl {
            name: self.name.clone(),
            population: self.population.clone(),
            range: AttributeRange::Continuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlrModel {
    formulas: Vec<WeightedFormula>,
    target: TargetSpec,
    train_mean: f64,
    lambda_mean: f64,
    hidden: Vec<HiddenValues>,
}

impl RlrModel {
    /// The intercept is moved to the front, added with weight 0 if absent.
    pub fn new(
        formulas: Vec<WeightedFormula>,
        target: TargetSpec,
        train_mean: f64,
        lambda_mean: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&train_mean) {
            return Err(RlrError::validation(format!(
                "train mean {train_mean} outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&lambda_mean) {
            return Err(RlrError::validation(format!(
                "lambda mean {lambda_mean} outside [0, 1]"
            )));
        }
        let mut list = Vec::with_capacity(formulas.len() + 1);
        let intercept = formulas
            .iter()
            .find(|wf| wf.formula.is_true())
            .map(|wf| wf.weight)
            .unwrap_or(0.0);
        list.push(WeightedFormula::new(Formula::truth(), intercept)?);
        for wf in formulas {
            if wf.formula.is_true() {
                continue;
            }
            if list.iter().any(|o| o.formula == wf.formula) {
                return Err(RlrError::validation(format!(
                    "`{}` listed twice",
                    wf.formula
                )));
            }
            list.push(wf);
        }
        Ok(RlrModel {
            formulas: list,
            target,
            train_mean,
            lambda_mean,
            hidden: Vec::new(),
        })
    }

    /// Predicts `logit(train_mean)` for everyone; the fallback when training
    /// has a single class.
    pub fn intercept_only(target: TargetSpec, train_mean: f64) -> Result<Self> {
        let p = train_mean.clamp(1e-6, 1.0 - 1e-6);
        let w = (p / (1.0 - p)).ln();
        RlrModel::new(
            vec![WeightedFormula::new(Formula::truth(), w)?],
            target,
            train_mean,
            0.0,
        )
    }

    pub fn formulas(&self) -> &[WeightedFormula] {
        &self.formulas
    }

    pub fn target(&self) -> &TargetSpec {
        &self.target
    }

    pub fn train_mean(&self) -> f64 {
        self.train_mean
    }

    pub fn lambda_mean(&self) -> f64 {
        self.lambda_mean
    }

    pub fn hidden(&self) -> &[HiddenValues] {
        &self.hidden
    }

    pub fn with_lambda_mean(mut self, lambda_mean: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda_mean) {
            return Err(RlrError::validation(format!(
                "lambda mean {lambda_mean} outside [0, 1]"
            )));
        }
        self.lambda_mean = lambda_mean;
        Ok(self)
    }

    pub fn with_hidden(mut self, hidden: Vec<HiddenValues>) -> Self {
        self.hidden = hidden;
        self
    }

    /// Formulas with a nonzero weight, intercept excluded.
    pub fn active_formulas(&self) -> impl Iterator<Item = &WeightedFormula> {
        self.formulas
            .iter()
            .filter(|wf| !wf.formula.is_true() && wf.weight != 0.0)
    }

    pub fn weight_of(&self, f: &Formula) -> Option<f64> {
        self.formulas
            .iter()
            .find(|wf| &wf.formula == f)
            .map(|wf| wf.weight)
    }

    /// `db` extended with this model's hidden attributes where missing.
    pub fn prepare_database(&self, db: &RelationalDatabase) -> Result<RelationalDatabase> {
        let mut out = db.clone();
        for h in &self.hidden {
            if out.schema().attribute(&h.name).is_some() {
                continue;
            }
            let pop = out.population(&h.population).ok_or_else(|| {
                RlrError::validation(format!("unknown population `{}`", h.population))
            })?;
            let mut values = vec![0.0; pop.len()];
            for (i, id) in pop.individuals().iter().enumerate() {
                let pos = h.ids.iter().position(|x| x == id).ok_or_else(|| {
                    RlrError::validation(format!("no learned `{}` value for `{id}`", h.name))
                })?;
                values[i] = h.values[pos];
            }
            out = out.with_continuous_attribute(h.decl(), values)?;
        }
        Ok(out)
    }

    /// Sigmoid of the weighted counts, no mean regularization.
    pub fn rlr_predict(&self, z: usize, db: &RelationalDatabase) -> f64 {
        let s: f64 = self
            .formulas
            .iter()
            .filter(|wf| wf.weight != 0.0)
            .map(|wf| wf.weight * count_formula(&wf.formula, &self.target, z, db))
            .sum();
        sigmoid(s)
    }

    /// `lambda_mean * train_mean + (1 - lambda_mean) * rlr_predict`.
    pub fn regularized_predict(&self, z: usize, db: &RelationalDatabase) -> f64 {
        self.blend(self.rlr_predict(z, db))
    }

    pub fn blend(&self, p: f64) -> f64 {
        self.lambda_mean * self.train_mean + (1.0 - self.lambda_mean) * p
    }

    /// Unregularized probability for every individual of the target population.
    pub fn rlr_predict_all(&self, db: &RelationalDatabase) -> Vec<f64> {
        let n = db.population_size(&self.target.population);
        let mut scores = vec![0.0; n];
        for wf in self.formulas.iter().filter(|wf| wf.weight != 0.0) {
            for (s, c) in scores
                .iter_mut()
                .zip(count_column(&wf.formula, &self.target, db))
            {
                *s += wf.weight * c;
            }
        }
        scores.into_iter().map(sigmoid).collect()
    }

    /// Regularized probability for every individual of the target population.
    pub fn predict_all(&self, db: &RelationalDatabase) -> Vec<f64> {
        self.rlr_predict_all(db)
            .into_iter()
            .map(|p| self.blend(p))
            .collect()
    }

    /// Unregularized probabilities for `rows`, reusing cached columns.
    pub fn rlr_predict_rows(&self, cache: &mut FeatureCache, rows: &[usize]) -> Result<Vec<f64>> {
        let mut scores = vec![0.0; rows.len()];
        for wf in self.formulas.iter().filter(|wf| wf.weight != 0.0) {
            let col = cache.column(&wf.formula)?;
            for (s, &r) in scores.iter_mut().zip(rows) {
                *s += wf.weight * col[r];
            }
        }
        Ok(scores.into_iter().map(sigmoid).collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let t = &self.target;
        writeln!(out, "{MAGIC}\t{MODEL_FORMAT_VERSION}").unwrap();
        writeln!(out, "target\t{}\t{}\t{}", t.attribute, t.var, t.positive).unwrap();
        writeln!(out, "train_mean\t{:?}", self.train_mean).unwrap();
        writeln!(out, "lambda_mean\t{:?}", self.lambda_mean).unwrap();
        for h in &self.hidden {
            writeln!(out, "hidden\t{}\t{}\t{}", h.name, h.population, h.ids.len()).unwrap();
            for (id, v) in h.ids.iter().zip(&h.values) {
                writeln!(out, "{id}\t{v:?}").unwrap();
            }
        }
        writeln!(out, "formulas\t{}", self.formulas.len()).unwrap();
        for wf in &self.formulas {
            writeln!(out, "{:?}\t{}", wf.weight, wf.formula).unwrap();
        }
        out
    }

    /// Parses a model against the database schema it will predict over;
    /// hidden attributes declared in the file are added to that schema.
    pub fn from_text(text: &str, schema: &Schema) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            let (i, l) = lines.next().ok_or_else(|| {
                RlrError::ModelFormat(format!("unexpected end of file, expected {what}"))
            })?;
            Ok((i + 1, l.split('\t').collect()))
        };
        let bad = |line: usize, msg: &str| RlrError::ModelFormat(format!("line {line}: {msg}"));

        let (ln, head) = next("header")?;
        if head.len() != 2 || head[0] != MAGIC {
            return Err(bad(ln, "not an rlr model file"));
        }
        let version: u32 = head[1].parse().map_err(|_| bad(ln, "bad version"))?;
        if version > MODEL_FORMAT_VERSION {
            return Err(RlrError::ModelFormat(format!(
                "model format version {version} is newer than supported version {MODEL_FORMAT_VERSION}"
            )));
        }

        let (ln, t) = next("target")?;
        if t.len() != 4 || t[0] != "target" {
            return Err(bad(
                ln,
                "expected `target<TAB>attribute<TAB>var<TAB>positive`",
            ));
        }
        let target = TargetSpec::new(schema, t[1], t[2], t[3])?;
        let mut real = |key: &str| -> Result<f64> {
            let (ln, f) = next(key)?;
            if f.len() != 2 || f[0] != key {
                return Err(bad(ln, &format!("expected `{key}`")));
            }
            f[1].parse().map_err(|_| bad(ln, &format!("bad {key}")))
        };
        let train_mean = real("train_mean")?;
        let lambda_mean = real("lambda_mean")?;

        let mut schema = schema.clone();
        let mut hidden = Vec::new();
        let count = loop {
            let (ln, f) = next("formulas")?;
            match (f.first().copied(), f.len()) {
                (Some("hidden"), 4) => {
                    let n: usize = f[3].parse().map_err(|_| bad(ln, "bad hidden count"))?;
                    let mut h = HiddenValues {
                        name: f[1].to_string(),
                        population: f[2].to_string(),
                        ids: Vec::with_capacity(n),
                        values: Vec::with_capacity(n),
                    };
                    for _ in 0..n {
                        let (ln, v) = next("hidden value")?;
                        if v.len() != 2 {
                            return Err(bad(ln, "expected `id<TAB>value`"));
                        }
                        h.ids.push(v[0].to_string());
                        h.values
                            .push(v[1].parse().map_err(|_| bad(ln, "bad hidden value"))?);
                    }
                    if schema.attribute(&h.name).is_none() {
                        schema.add_attribute(h.decl())?;
                    }
                    hidden.push(h);
                }
                (Some("formulas"), 2) => {
                    break f[1]
                        .parse::<usize>()
                        .map_err(|_| bad(ln, "bad formula count"))?
                }
                _ => return Err(bad(ln, "expected `hidden` or `formulas`")),
            }
        };
        let mut formulas = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, f) = next("weighted formula")?;
            if f.len() != 2 {
                return Err(bad(ln, "expected `weight<TAB>formula`"));
            }
            let w: f64 = f[0].parse().map_err(|_| bad(ln, "bad weight"))?;
            let formula = Formula::parse(f[1], &schema)?;
            formulas.push(WeightedFormula::new(formula, w)?);
        }
        if let Some((i, _)) = lines.next() {
            return Err(bad(i + 1, "trailing content"));
        }
        Ok(RlrModel::new(formulas, target, train_mean, lambda_mean)?.with_hidden(hidden))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| RlrError::io(path, e))
    }

    pub fn load(path: &Path, schema: &Schema) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RlrError::io(path, e))?;
        RlrModel::from_text(&text, schema)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::RelationDecl;

    fn friends() -> (RelationalDatabase, TargetSpec) {
        let mut s = Schema::new();
        s.add_population("person").unwrap();
        for name in ["kind", "happy"] {
            s.add_attribute(AttributeDecl {
                name: name.into(),
                population: "person".into(),
                range: AttributeRange::Boolean,
            })
            .unwrap();
        }
        s.add_relation(RelationDecl {
            name: "friend".into(),
            populations: ["person".into(), "person".into()],
        })
        .unwrap();
        // person 0 has five kind friends
        let mut pairs: Vec<(usize, usize)> = (1..=5).map(|j| (0, j)).collect();
        pairs.push((1, 2));
        let db = RelationalDatabase::builder(s)
            .anonymous_population("person", 6)
            .unwrap()
            .boolean("kind", &[false, true, true, true, true, true])
            .unwrap()
            .boolean("happy", &[true, false, false, true, false, true])
            .unwrap()
            .relation("friend", pairs)
            .unwrap()
            .build()
            .unwrap();
        let t = TargetSpec::new(db.schema(), "happy", "z", "true").unwrap();
        (db, t)
    }

    fn example_model(db: &RelationalDatabase, t: &TargetSpec) -> RlrModel {
        let f = Formula::parse("friend(z,y) * kind(y)", db.schema()).unwrap();
        RlrModel::new(
            vec![
                WeightedFormula::new(Formula::truth(), -4.5).unwrap(),
                WeightedFormula::new(f, 1.0).unwrap(),
            ],
            t.clone(),
            0.5,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn five_kind_friends() {
        let (db, t) = friends();
        let m = example_model(&db, &t);
        assert!((m.rlr_predict(0, &db) - 0.6224593312018546).abs() < 1e-15);
        assert_eq!(m.predict_all(&db)[0], m.rlr_predict(0, &db));
    }

    #[test]
    fn intercept_is_always_present() {
        let (db, t) = friends();
        let m = RlrModel::new(vec![], t, 0.3, 0.0).unwrap();
        assert_eq!(m.formulas().len(), 1);
        assert_eq!(m.rlr_predict(4, &db), 0.5);
    }

    #[test]
    fn blending() {
        let (db, t) = friends();
        let m = example_model(&db, &t).with_lambda_mean(1.0).unwrap();
        assert_eq!(m.regularized_predict(0, &db), 0.5);
        let m = RlrModel::new(vec![], t, 0.7, 0.5).unwrap();
        assert!((m.blend(0.9) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let (db, t) = friends();
        let hidden = HiddenValues {
            name: "H_1".into(),
            population: "person".into(),
            ids: db.population("person").unwrap().individuals().to_vec(),
            values: vec![0.1, -0.25, 1.0 / 3.0, 0.0, 2e-9, -7.5],
        };
        let aug = db
            .with_continuous_attribute(hidden.decl(), hidden.values.clone())
            .unwrap();
        let f = Formula::parse("friend(z,y) * H_1(y)", aug.schema()).unwrap();
        let m = RlrModel::new(
            vec![
                WeightedFormula::new(Formula::truth(), -0.123456789).unwrap(),
                WeightedFormula::new(f, std::f64::consts::PI).unwrap(),
            ],
            t,
            0.6,
            0.05,
        )
        .unwrap()
        .with_hidden(vec![hidden]);
        let back = RlrModel::from_text(&m.to_text(), db.schema()).unwrap();
        assert_eq!(back, m);
        let a = m.predict_all(&aug);
        let b = back.predict_all(&back.prepare_database(&db).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_newer_version() {
        let (db, t) = friends();
        let text = example_model(&db, &t)
            .to_text()
            .replacen("rlr-model\t1", "rlr-model\t2", 1);
        let err = RlrModel::from_text(&text, db.schema()).unwrap_err();
        assert!(err.to_string().contains("newer"));
        assert!(RlrModel::from_text("garbage", db.schema()).is_err());
    }
}
