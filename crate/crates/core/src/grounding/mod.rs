//! Formula evaluation against a ground database and the reduction of a
//! weighted-formula set to a flat count-feature design matrix.
//!
//! A formula's value for a target individual is the sum, over every joint
//! assignment of its non-target variables (full cross product, repeats
//! allowed), of the product of its literals: relation literals and
//! equality literals contribute 0 or 1, continuous attributes contribute
//! their stored value.

mod plan;

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::lr::DenseMatrix;
use crate::schema::{Formula, Literal, TargetSpec};

use plan::Plan;

/// Product of the literals of `f` under a full assignment of its variables.
///
/// # Panics
/// If the assignment misses a variable of `f`.
pub fn evaluate_formula(
    f: &Formula,
    assignment: &HashMap<String, usize>,
    db: &RelationalDatabase,
) -> f64 {
    let get = |v: &str| -> usize {
        *assignment
            .get(v)
            .unwrap_or_else(|| panic!("no individual assigned to `{v}`"))
    };
    let mut value = 1.0;
    for lit in f.literals() {
        let factor = match lit {
            Literal::Relation { name, args } => {
                let rel = db.relation(name).expect("declared relation");
                if rel.contains(get(&args[0]), get(&args[1])) {
                    1.0
                } else {
                    0.0
                }
            }
            Literal::Equals {
                attribute,
                var,
                value,
            } => {
                let code = db.discrete_code(attribute, get(var));
                if code.is_some() && code == db.value_code(attribute, value) {
                    1.0
                } else {
                    0.0
                }
            }
            Literal::Continuous { attribute, var } => db
                .continuous_value(attribute, get(var))
                .expect("declared continuous attribute"),
        };
        value *= factor;
        if value == 0.0 {
            break;
        }
    }
    value
}

/// Checks that `f` is meaningful for `target` over `db`: every symbol is
/// declared with matching populations, the target variable ranges over the
/// target population, and the predicted attribute itself is not used.
pub fn validate_formula(f: &Formula, target: &TargetSpec, db: &RelationalDatabase) -> Result<()> {
    let rebuilt = Formula::from_literals(f.literals().to_vec(), db.schema())?;
    if rebuilt.vars() != f.vars() {
        return Err(RlrError::validation(format!(
            "`{f}` does not match the database declarations"
        )));
    }
    if let Some(pop) = f.population_of(&target.var) {
        if pop != target.population {
            return Err(RlrError::validation(format!(
                "target variable `{}` ranges over `{pop}` in `{f}`, expected `{}`",
                target.var, target.population
            )));
        }
    }
    if f.mentions(&target.attribute) {
        return Err(RlrError::validation(format!(
            "`{f}` uses the predicted attribute `{}`",
            target.attribute
        )));
    }
    Ok(())
}

/// Value of `f` for target individual `z` (the target variable fixed to `z`).
pub fn count_formula(f: &Formula, target: &TargetSpec, z: usize, db: &RelationalDatabase) -> f64 {
    Plan::new(f, &target.var, db).count(z)
}

/// Value of `f` for every individual of the target population, in order.
pub fn count_column(f: &Formula, target: &TargetSpec, db: &RelationalDatabase) -> Vec<f64> {
    Plan::new(f, &target.var, db).column(db.population_size(&target.population))
}

/// For every target individual, the value of `f` broken down by the
/// individual assigned to `var`: sparse `(individual, count)` pairs in
/// ascending order. Summing a row's counts gives [`count_formula`].
pub fn count_by_variable(
    f: &Formula,
    target: &TargetSpec,
    var: &str,
    db: &RelationalDatabase,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let plan = Plan::new(f, &target.var, db);
    let v = plan
        .var_index(var)
        .ok_or_else(|| RlrError::validation(format!("`{var}` does not occur in `{f}`")))?;
    Ok(plan.split_by(v, db.population_size(&target.population)))
}

/// Whether the counting engine can use message passing for `f` (its
/// variable graph is a forest). Exposed for diagnostics and tests.
pub fn has_tree_plan(f: &Formula, target: &TargetSpec, db: &RelationalDatabase) -> bool {
    Plan::new(f, &target.var, db).is_forest()
}

/// Flat learning problem: one row per target individual, one column per
/// formula. Column 0 is always `True`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    columns: Vec<Formula>,
    rows: Vec<usize>,
    x: DenseMatrix,
    labels: Option<Vec<bool>>,
}

impl DesignMatrix {
    pub fn columns(&self) -> &[Formula] {
        &self.columns
    }

    /// Target individual index of each row.
    pub fn row_keys(&self) -> &[usize] {
        &self.rows
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Subset of rows by position.
    pub fn select_rows(&self, positions: &[usize]) -> DesignMatrix {
        DesignMatrix {
            columns: self.columns.clone(),
            rows: positions.iter().map(|&p| self.rows[p]).collect(),
            x: self.x.select_rows(positions),
            labels: self
                .labels
                .as_ref()
                .map(|l| positions.iter().map(|&p| l[p]).collect()),
        }
    }

    /// CSV with canonical formula strings as the header followed by `label`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.columns.iter().map(|f| f.to_string()).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(match &self.labels {
                Some(l) => if l[i] { "1" } else { "0" }.to_string(),
                None => String::new(),
            });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn with_intercept(formulas: &[Formula]) -> Vec<Formula> {
    let mut cols = vec![Formula::truth()];
    for f in formulas {
        if !cols.contains(f) {
            cols.push(f.clone());
        }
    }
    cols
}

/// Training matrix: rows are `rows` (or every individual of the target
/// population) minus those with an unobserved label.
pub fn build_design_matrix(
    formulas: &[Formula],
    target: &TargetSpec,
    db: &RelationalDatabase,
    rows: Option<&[usize]>,
) -> Result<DesignMatrix> {
    FeatureCache::new(db, target).design_matrix(formulas, rows)
}

/// Prediction matrix for `rows` (or the whole population); no labels.
pub fn build_prediction_matrix(
    formulas: &[Formula],
    target: &TargetSpec,
    db: &RelationalDatabase,
    rows: Option<&[usize]>,
) -> Result<DesignMatrix> {
    FeatureCache::new(db, target).prediction_matrix(formulas, rows)
}

/// Memoizes whole-population count columns per formula. Counts never read
/// the predicted attribute, so one column serves every fold.
pub struct FeatureCache<'a> {
    db: &'a RelationalDatabase,
    target: &'a TargetSpec,
    columns: HashMap<Formula, Arc<Vec<f64>>>,
}

impl<'a> FeatureCache<'a> {
    pub fn new(db: &'a RelationalDatabase, target: &'a TargetSpec) -> Self {
        FeatureCache {
            db,
            target,
            columns: HashMap::new(),
        }
    }

    pub fn db(&self) -> &'a RelationalDatabase {
        self.db
    }

    pub fn target(&self) -> &'a TargetSpec {
        self.target
    }

    pub fn column(&mut self, f: &Formula) -> Result<Arc<Vec<f64>>> {
        if let Some(c) = self.columns.get(f) {
            return Ok(c.clone());
        }
        validate_formula(f, self.target, self.db)?;
        let col = Arc::new(count_column(f, self.target, self.db));
        self.columns.insert(f.clone(), col.clone());
        Ok(col)
    }

    fn matrix(
        &mut self,
        formulas: &[Formula],
        rows: &[usize],
        labels: Option<Vec<bool>>,
    ) -> Result<DesignMatrix> {
        let columns = with_intercept(formulas);
        let size = self.db.population_size(&self.target.population);
        if let Some(bad) = rows.iter().find(|r| **r >= size) {
            return Err(RlrError::validation(format!(
                "row {bad} is outside the target population"
            )));
        }
        let cols: Vec<Arc<Vec<f64>>> = columns
            .iter()
            .map(|f| self.column(f))
            .collect::<Result<_>>()?;
        let mut x = DenseMatrix::zeros(rows.len(), columns.len());
        for (i, &r) in rows.iter().enumerate() {
            let row = x.row_mut(i);
            for (j, c) in cols.iter().enumerate() {
                row[j] = c[r];
            }
        }
        Ok(DesignMatrix {
            columns,
            rows: rows.to_vec(),
            x,
            labels,
        })
    }

    pub fn design_matrix(
        &mut self,
        formulas: &[Formula],
        rows: Option<&[usize]>,
    ) -> Result<DesignMatrix> {
        let all = self.db.labels(self.target);
        let keep: Vec<usize> = match rows {
            Some(r) => r
                .iter()
                .copied()
                .filter(|&i| all.get(i).copied().flatten().is_some())
                .collect(),
            None => (0..all.len()).filter(|&i| all[i].is_some()).collect(),
        };
        let labels = keep
            .iter()
            .map(|&i| all[i].expect("labelled row"))
            .collect();
        self.matrix(formulas, &keep, Some(labels))
    }

    pub fn prediction_matrix(
        &mut self,
        formulas: &[Formula],
        rows: Option<&[usize]>,
    ) -> Result<DesignMatrix> {
        let all: Vec<usize> = match rows {
            Some(r) => r.to_vec(),
            None => (0..self.db.population_size(&self.target.population)).collect(),
        };
        self.matrix(formulas, &all, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{AttributeDecl, AttributeRange, RelationDecl, Schema};

    fn continuous_world() -> (RelationalDatabase, TargetSpec) {
        let mut s = Schema::new();
        s.add_population("x").unwrap();
        for name in ["r", "s", "q"] {
            s.add_attribute(AttributeDecl {
                name: name.into(),
                population: "x".into(),
                range: AttributeRange::Boolean,
            })
            .unwrap();
        }
        s.add_attribute(AttributeDecl {
            name: "t".into(),
            population: "x".into(),
            range: AttributeRange::Continuous,
        })
        .unwrap();
        let db = RelationalDatabase::builder(s)
            .anonymous_population("x", 1)
            .unwrap()
            .boolean("r", &[true])
            .unwrap()
            .boolean("s", &[false])
            .unwrap()
            .boolean("q", &[true])
            .unwrap()
            .continuous("t", vec![0.2])
            .unwrap()
            .build()
            .unwrap();
        let target = TargetSpec::new(db.schema(), "q", "X", "true").unwrap();
        (db, target)
    }

    #[test]
    fn product_semantics() {
        let (db, _) = continuous_world();
        let a: HashMap<String, usize> = [("X".to_string(), 0)].into();
        let ev = |s: &str| evaluate_formula(&Formula::parse(s, db.schema()).unwrap(), &a, &db);
        assert_eq!(ev("r(X) * s(X)"), 0.0);
        assert_eq!(ev("r(X) * s(X)=false"), 1.0);
        assert!((ev("r(X) * s(X)=false * t(X)") - 0.2).abs() < 1e-15);
        // taken literally the product with s(X) stays zero
        assert_eq!(ev("r(X) * s(X) * t(X)"), 0.0);
        assert_eq!(ev("True"), 1.0);
    }

    #[test]
    #[should_panic(expected = "no individual assigned")]
    fn missing_assignment_panics() {
        let (db, _) = continuous_world();
        let f = Formula::parse("r(Y)", db.schema()).unwrap();
        evaluate_formula(&f, &HashMap::new(), &db);
    }

    fn friends_world() -> (RelationalDatabase, TargetSpec) {
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
        // 0 -> {1,2,3}, 1 -> {0}, 2 -> {0,1}
        let db = RelationalDatabase::builder(s)
            .anonymous_population("person", 4)
            .unwrap()
            .boolean("kind", &[true, true, false, true])
            .unwrap()
            .discrete("happy", &[Some("true"), Some("false"), None, Some("true")])
            .unwrap()
            .relation(
                "friend",
                vec![(0, 1), (0, 2), (0, 3), (1, 0), (2, 0), (2, 1)],
            )
            .unwrap()
            .build()
            .unwrap();
        let t = TargetSpec::new(db.schema(), "happy", "z", "true").unwrap();
        (db, t)
    }

    #[test]
    fn counts_and_columns() {
        let (db, t) = friends_world();
        let f = Formula::parse("friend(z,y) * kind(y)", db.schema()).unwrap();
        assert_eq!(count_column(&f, &t, &db), vec![2.0, 1.0, 2.0, 0.0]);
        assert_eq!(count_formula(&f, &t, 0, &db), 2.0);
        assert_eq!(count_formula(&Formula::truth(), &t, 2, &db), 1.0);
        // mutual friendship is a two-literal edge
        let m = Formula::parse("friend(z,y) * friend(y,z)", db.schema()).unwrap();
        assert_eq!(count_column(&m, &t, &db), vec![2.0, 1.0, 1.0, 0.0]);
        // formula without the target variable is constant
        let c = Formula::parse("friend(a,b) * kind(b)", db.schema()).unwrap();
        assert_eq!(count_column(&c, &t, &db), vec![5.0; 4]);
    }

    #[test]
    fn cycle_uses_enumeration() {
        let (db, t) = friends_world();
        let tri = Formula::parse("friend(z,a) * friend(a,b) * friend(b,z)", db.schema()).unwrap();
        assert!(!has_tree_plan(&tri, &t, &db));
        // 0->2->1->0 and 0->1->? (1->0 only) ; triangles through each node
        let col = count_column(&tri, &t, &db);
        assert_eq!(col, vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn split_by_sums_to_count() {
        let (db, t) = friends_world();
        let f = Formula::parse("friend(z,y) * friend(y,w) * kind(w)", db.schema()).unwrap();
        let col = count_column(&f, &t, &db);
        let split = count_by_variable(&f, &t, "w", &db).unwrap();
        for (z, parts) in split.iter().enumerate() {
            let s: f64 = parts.iter().map(|(_, c)| c).sum();
            assert_eq!(s, col[z]);
        }
        assert!(count_by_variable(&f, &t, "nope", &db).is_err());
    }

    #[test]
    fn design_matrix_skips_unlabeled_rows() {
        let (db, t) = friends_world();
        let fs = vec![
            Formula::parse("friend(z,y)", db.schema()).unwrap(),
            Formula::parse("friend(z,y) * kind(y)", db.schema()).unwrap(),
        ];
        let dm = build_design_matrix(&fs, &t, &db, None).unwrap();
        assert_eq!(dm.row_keys(), &[0, 1, 3]);
        assert_eq!(dm.x().row(0), &[1.0, 3.0, 2.0]);
        assert_eq!(dm.labels().unwrap(), &[true, false, true]);
        let pm = build_prediction_matrix(&fs, &t, &db, Some(&[2])).unwrap();
        assert_eq!(pm.x().row(0), &[1.0, 2.0, 2.0]);
        assert!(pm.labels().is_none());
        // the intercept alone
        let only = build_design_matrix(&[], &t, &db, None).unwrap();
        assert_eq!(only.columns(), &[Formula::truth()]);
        assert!(only.x().column(0).all(|v| v == 1.0));
    }

    #[test]
    fn rejects_predicted_attribute() {
        let (db, t) = friends_world();
        let f = Formula::parse("friend(z,y) * happy(y)", db.schema()).unwrap();
        assert!(build_design_matrix(&[f], &t, &db, None).is_err());
    }

    #[test]
    fn csv_export_has_formula_header() {
        let (db, t) = friends_world();
        let fs = vec![Formula::parse("friend(z,y) * kind(y)", db.schema()).unwrap()];
        let dm = build_design_matrix(&fs, &t, &db, None).unwrap();
        let mut buf = Vec::new();
        dm.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "True,\"friend(z,y) * kind(y)\",label");
        assert_eq!(text.lines().nth(1).unwrap(), "1,2,1");
    }
}
