use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::schema::{
    AttributeDecl, AttributeRange, RelationDecl, Schema, TargetSpec, FALSE_VALUE, TRUE_VALUE,
};

/// A dataset description: CSV tables for populations, attributes and
/// relations, plus the prediction target. Relative paths resolve against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(rename = "population", default)]
    pub populations: Vec<PopulationSpec>,
    #[serde(rename = "attribute", default)]
    pub attributes: Vec<AttributeSpec>,
    #[serde(rename = "relation", default)]
    pub relations: Vec<RelationSpec>,
    pub target: TargetDecl,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub name: String,
    pub file: PathBuf,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Boolean,
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    pub population: String,
    #[serde(rename = "type")]
    pub kind: AttributeKind,
    /// Defaults to the population's file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Defaults to the population's id column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Defaults to the attribute name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    /// Declared categorical values; inferred from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSpec {
    pub name: String,
    pub populations: [String; 2],
    pub file: PathBuf,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDecl {
    pub attribute: String,
    pub positive: String,
    /// Logical variable standing for the row individual.
    #[serde(default = "default_var")]
    pub var: String,
    /// New class name to the original classes merged into it.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub merge: BTreeMap<String, Vec<String>>,
}

fn default_var() -> String {
    "z".into()
}

impl DatasetManifest {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: DatasetManifest = toml::from_str(text)
            .map_err(|e| RlrError::Config(format!("manifest: {}", e.message())))?;
        m.base_dir = base_dir.to_path_buf();
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RlrError::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        DatasetManifest::from_toml(&text, dir).map_err(|e| match e {
            RlrError::Config(msg) => RlrError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn population(&self, name: &str) -> Result<&PopulationSpec> {
        self.populations
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| RlrError::Config(format!("unknown population `{name}`")))
    }

    /// The target declared by the manifest, checked against `schema`.
    pub fn target_spec(&self, schema: &Schema) -> Result<TargetSpec> {
        TargetSpec::new(
            schema,
            &self.target.attribute,
            &self.target.var,
            &self.target.positive,
        )
    }
}

/// A CSV file read fully, with its header resolved.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    /// `(line number, fields)`.
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| RlrError::csv(path, e))?;
        let header = reader
            .headers()
            .map_err(|e| RlrError::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| RlrError::csv(path, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RlrError::Load {
                file: self.path.clone(),
                line: 1,
                message: format!("no column `{name}` in header"),
            })
    }

    fn error(&self, line: usize, message: String) -> RlrError {
        RlrError::Load {
            file: self.path.clone(),
            line,
            message,
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" | "t" => Some(true),
        "false" | "0" | "no" | "n" | "f" => Some(false),
        _ => None,
    }
}

/// Loads and validates every table of the manifest. The target attribute
/// may have empty cells (unobserved); every other attribute is total.
/// Columns not named in the manifest are ignored.
pub fn load_database(manifest: &DatasetManifest) -> Result<RelationalDatabase> {
    let mut needed: Vec<&Path> = manifest
        .populations
        .iter()
        .map(|p| p.file.as_path())
        .collect();
    for a in &manifest.attributes {
        match &a.file {
            Some(f) => needed.push(f),
            None => needed.push(&manifest.population(&a.population)?.file),
        }
    }
    needed.extend(manifest.relations.iter().map(|r| r.file.as_path()));
    let mut tables: HashMap<PathBuf, Table> = HashMap::new();
    for p in needed {
        let path = manifest.resolve(p);
        if let std::collections::hash_map::Entry::Vacant(e) = tables.entry(path) {
            let t = Table::read(e.key())?;
            e.insert(t);
        }
    }
    let table = |p: &Path| -> Result<&Table> { Ok(&tables[&manifest.resolve(p)]) };

    let mut schema = Schema::new();
    let mut populations: Vec<(String, Vec<String>)> = Vec::new();
    for p in &manifest.populations {
        schema.add_population(&p.name)?;
        let t = table(&p.file)?;
        let col = t.column(&p.id)?;
        let mut ids = Vec::with_capacity(t.rows.len());
        let mut seen = BTreeSet::new();
        for (line, fields) in &t.rows {
            let id = fields[col].clone();
            if id.is_empty() {
                return Err(t.error(*line, format!("empty id in column `{}`", p.id)));
            }
            if !seen.insert(id.clone()) {
                return Err(t.error(*line, format!("duplicate id `{id}`")));
            }
            ids.push(id);
        }
        populations.push((p.name.clone(), ids));
    }

    let index: HashMap<&str, HashMap<&str, usize>> = populations
        .iter()
        .map(|(n, ids)| {
            (
                n.as_str(),
                ids.iter()
                    .enumerate()
                    .map(|(i, id)| (id.as_str(), i))
                    .collect(),
            )
        })
        .collect();

    enum Values {
        Discrete(Vec<Option<String>>),
        Continuous(Vec<f64>),
    }
    let mut values: Vec<(String, Values)> = Vec::new();
    for a in &manifest.attributes {
        let pop = manifest.population(&a.population)?;
        let t = table(a.file.as_deref().unwrap_or(&pop.file))?;
        let id_col = t.column(a.id.as_deref().unwrap_or(&pop.id))?;
        let col = t.column(a.column.as_deref().unwrap_or(&a.name))?;
        let idx = &index[a.population.as_str()];
        let is_target = a.name == manifest.target.attribute;
        let n = idx.len();
        let mut raw: Vec<Option<String>> = vec![None; n];
        let mut filled = vec![false; n];
        for (line, fields) in &t.rows {
            let id = fields[id_col].as_str();
            let i = *idx
                .get(id)
                .ok_or_else(|| t.error(*line, format!("unknown `{}` id `{id}`", a.population)))?;
            if filled[i] {
                return Err(t.error(*line, format!("second value of `{}` for `{id}`", a.name)));
            }
            filled[i] = true;
            let v = fields[col].clone();
            if v.is_empty() {
                if !is_target {
                    return Err(t.error(*line, format!("missing value of `{}` for `{id}`", a.name)));
                }
                continue;
            }
            let v = if is_target {
                manifest
                    .target
                    .merge
                    .iter()
                    .find(|(_, olds)| olds.contains(&v))
                    .map_or(v, |(new, _)| new.clone())
            } else {
                v
            };
            raw[i] = Some(v);
        }
        if !is_target {
            if let Some(i) = filled.iter().position(|f| !f) {
                return Err(RlrError::Load {
                    file: t.path.clone(),
                    line: 0,
                    message: format!(
                        "no value of `{}` for `{}`",
                        a.name,
                        populations_id(&populations, &a.population, i)
                    ),
                });
            }
        }
        let line_of = |i: usize| -> usize {
            t.rows
                .iter()
                .find(|(_, f)| idx.get(f[id_col].as_str()) == Some(&i))
                .map_or(0, |(l, _)| *l)
        };
        let (range, vals) = match a.kind {
            AttributeKind::Continuous => {
                let mut out = Vec::with_capacity(n);
                for (i, v) in raw.iter().enumerate() {
                    let v = v.as_deref().unwrap_or("");
                    let x: f64 =
                        v.parse()
                            .ok()
                            .filter(|x: &f64| x.is_finite())
                            .ok_or_else(|| {
                                t.error(line_of(i), format!("`{v}` is not a finite number"))
                            })?;
                    out.push(x);
                }
                (AttributeRange::Continuous, Values::Continuous(out))
            }
            AttributeKind::Boolean => {
                let mut out = Vec::with_capacity(n);
                for (i, v) in raw.iter().enumerate() {
                    out.push(match v {
                        None => None,
                        Some(s) => Some(
                            if parse_bool(s).ok_or_else(|| {
                                t.error(line_of(i), format!("`{s}` is not a boolean"))
                            })? {
                                TRUE_VALUE.to_string()
                            } else {
                                FALSE_VALUE.to_string()
                            },
                        ),
                    });
                }
                (AttributeRange::Boolean, Values::Discrete(out))
            }
            AttributeKind::Categorical => {
                let declared = match (&a.values, is_target && !manifest.target.merge.is_empty()) {
                    (Some(vs), false) => vs.clone(),
                    _ => raw
                        .iter()
                        .flatten()
                        .cloned()
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect(),
                };
                for (i, v) in raw.iter().enumerate() {
                    if let Some(v) = v {
                        if !declared.contains(v) {
                            return Err(t.error(
                                line_of(i),
                                format!("`{v}` is not a declared value of `{}`", a.name),
                            ));
                        }
                    }
                }
                if is_target && declared.len() != 2 {
                    return Err(RlrError::Config(format!(
                        "target `{}` has {} classes ({}); merge classes down to two with [target.merge]",
                        a.name,
                        declared.len(),
                        declared.join(", ")
                    )));
                }
                (AttributeRange::Categorical(declared), Values::Discrete(raw))
            }
        };
        schema.add_attribute(AttributeDecl {
            name: a.name.clone(),
            population: a.population.clone(),
            range,
        })?;
        values.push((a.name.clone(), vals));
    }

    let mut tuples: Vec<(String, Vec<(usize, usize)>)> = Vec::new();
    for r in &manifest.relations {
        schema.add_relation(RelationDecl {
            name: r.name.clone(),
            populations: r.populations.clone(),
        })?;
        for p in &r.populations {
            manifest.population(p)?;
        }
        let t = table(&r.file)?;
        let (ca, cb) = (t.column(&r.from)?, t.column(&r.to)?);
        let (ia, ib) = (
            &index[r.populations[0].as_str()],
            &index[r.populations[1].as_str()],
        );
        let mut pairs = Vec::with_capacity(t.rows.len());
        for (line, fields) in &t.rows {
            let a = *ia.get(fields[ca].as_str()).ok_or_else(|| {
                t.error(
                    *line,
                    format!("unknown `{}` id `{}`", r.populations[0], fields[ca]),
                )
            })?;
            let b = *ib.get(fields[cb].as_str()).ok_or_else(|| {
                t.error(
                    *line,
                    format!("unknown `{}` id `{}`", r.populations[1], fields[cb]),
                )
            })?;
            pairs.push((a, b));
        }
        tuples.push((r.name.clone(), pairs));
    }

    let mut b = RelationalDatabase::builder(schema);
    for (name, ids) in populations {
        b = b.population(&name, ids)?;
    }
    for (name, v) in values {
        b = match v {
            Values::Discrete(d) => b.discrete(&name, &d)?,
            Values::Continuous(c) => b.continuous(&name, c)?,
        };
    }
    for (name, pairs) in tuples {
        b = b.relation(&name, pairs)?;
    }
    let db = b.build()?;
    manifest.target_spec(db.schema())?;
    Ok(db)
}

fn populations_id(pops: &[(String, Vec<String>)], pop: &str, i: usize) -> String {
    pops.iter()
        .find(|(n, _)| n == pop)
        .and_then(|(_, ids)| ids.get(i).cloned())
        .unwrap_or_default()
}
