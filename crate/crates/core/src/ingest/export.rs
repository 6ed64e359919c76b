use std::path::{Path, PathBuf};

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::schema::AttributeRange;

use super::manifest::{
    AttributeKind, AttributeSpec, DatasetManifest, PopulationSpec, RelationSpec, TargetDecl,
};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> RlrError + '_ {
    move |e| RlrError::csv(path, e)
}

/// Writes one CSV per population (id plus its attributes) and per relation
/// into `dir`, and returns the manifest describing them with `target`.
/// Unobserved discrete values are written as empty cells.
pub fn write_tables(
    db: &RelationalDatabase,
    dir: &Path,
    target: TargetDecl,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| RlrError::io(dir, e))?;
    let schema = db.schema();
    let mut manifest = DatasetManifest {
        populations: Vec::new(),
        attributes: Vec::new(),
        relations: Vec::new(),
        target,
        base_dir: dir.to_path_buf(),
    };
    for pop in schema.populations() {
        let file = PathBuf::from(format!("{pop}.csv"));
        let path = dir.join(&file);
        let attrs: Vec<_> = schema
            .attributes()
            .iter()
            .filter(|a| &a.population == pop)
            .collect();
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        let mut header = vec!["id".to_string()];
        header.extend(attrs.iter().map(|a| a.name.clone()));
        w.write_record(&header).map_err(csv_err(&path))?;
        let population = db.population(pop).expect("declared population");
        for (i, id) in population.individuals().iter().enumerate() {
            let mut row = vec![id.clone()];
            for a in &attrs {
                row.push(match a.range {
                    AttributeRange::Continuous => {
                        format!(
                            "{:?}",
                            db.continuous_value(&a.name, i).expect("continuous value")
                        )
                    }
                    _ => db.discrete_value(&a.name, i).unwrap_or("").to_string(),
                });
            }
            w.write_record(&row).map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| RlrError::io(&path, e))?;
        manifest.populations.push(PopulationSpec {
            name: pop.clone(),
            file,
            id: "id".into(),
        });
        for a in attrs {
            let (kind, values) = match &a.range {
                AttributeRange::Boolean => (AttributeKind::Boolean, None),
                AttributeRange::Categorical(v) => (AttributeKind::Categorical, Some(v.clone())),
                AttributeRange::Continuous => (AttributeKind::Continuous, None),
            };
            manifest.attributes.push(AttributeSpec {
                name: a.name.clone(),
                population: pop.clone(),
                kind,
                file: None,
                id: None,
                column: None,
                values,
            });
        }
    }
    for rel in schema.relations() {
        let file = PathBuf::from(format!("{}.csv", rel.name));
        let path = dir.join(&file);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["from", "to"]).map_err(csv_err(&path))?;
        let from = db
            .population(&rel.populations[0])
            .expect("declared population");
        let to = db
            .population(&rel.populations[1])
            .expect("declared population");
        for (a, b) in db.relation(&rel.name).expect("declared relation").pairs() {
            w.write_record([&from.individuals()[a], &to.individuals()[b]])
                .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| RlrError::io(&path, e))?;
        manifest.relations.push(RelationSpec {
            name: rel.name.clone(),
            populations: rel.populations.clone(),
            file,
            from: "from".into(),
            to: "to".into(),
        });
    }
    Ok(manifest)
}

/// Writes `manifest` as TOML to `path`.
pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let text = toml::to_string(manifest).map_err(|e| RlrError::Config(format!("manifest: {e}")))?;
    std::fs::write(path, text).map_err(|e| RlrError::io(path, e))
}

/// [`write_tables`] followed by `manifest.toml` in the same directory.
pub fn write_dataset(db: &RelationalDatabase, dir: &Path, target: TargetDecl) -> Result<PathBuf> {
    let manifest = write_tables(db, dir, target)?;
    let path = dir.join("manifest.toml");
    write_manifest(&manifest, &path)?;
    Ok(path)
}
