use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use crate::database::RelationalDatabase;
use crate::error::{Result, RlrError};
use crate::schema::{AttributeDecl, AttributeRange, RelationDecl, Schema};

use super::export::{write_manifest, write_tables};
use super::manifest::TargetDecl;

/// Movie genres kept as Boolean attributes.
pub const GENRES: [&str; 3] = ["action", "horror", "drama"];

/// Age bands: under 25, 25 to 35, 36 and over.
pub fn age_class(age: u32) -> &'static str {
    match age {
        0..=24 => "age_1",
        25..=35 => "age_2",
        _ => "age_3",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovieLensSummary {
    pub users: usize,
    pub movies: usize,
    pub ratings: usize,
    pub gender_manifest: PathBuf,
    pub age_manifest: PathBuf,
}

struct RawTable {
    path: PathBuf,
    rows: Vec<(usize, Vec<String>)>,
}

impl RawTable {
    fn read(path: &Path, sep: char, header: bool) -> Result<RawTable> {
        let bytes = std::fs::read(path).map_err(|e| RlrError::io(path, e))?;
        let text = String::from_utf8_lossy(&bytes);
        let rows = text
            .lines()
            .enumerate()
            .skip(usize::from(header))
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.split(sep).map(|f| f.trim().to_string()).collect()))
            .collect();
        Ok(RawTable {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn field<'a>(&self, line: usize, row: &'a [String], i: usize) -> Result<&'a str> {
        row.get(i)
            .map(String::as_str)
            .ok_or_else(|| RlrError::Load {
                file: self.path.clone(),
                line,
                message: format!("expected at least {} fields", i + 1),
            })
    }
}

/// id, age, gender, occupation.
type UserRow = (String, u32, String, String);

struct Raw {
    /// `(id, age, gender, occupation)`.
    users: Vec<UserRow>,
    /// `(id, genres)`.
    movies: Vec<(String, BTreeSet<String>)>,
    ratings: Vec<(String, String, usize, PathBuf)>,
}

fn parse_age(t: &RawTable, line: usize, s: &str) -> Result<u32> {
    s.parse().map_err(|_| RlrError::Load {
        file: t.path.clone(),
        line,
        message: format!("bad age `{s}`"),
    })
}

/// Tab-separated `ml-100k.user`, `ml-100k.item`, `ml-100k.inter` with typed headers.
fn read_atomic(dir: &Path) -> Result<Raw> {
    let users_t = RawTable::read(&dir.join("ml-100k.user"), '\t', true)?;
    let mut users = Vec::new();
    for (line, row) in &users_t.rows {
        let age = parse_age(&users_t, *line, users_t.field(*line, row, 1)?)?;
        users.push((
            users_t.field(*line, row, 0)?.to_string(),
            age,
            users_t.field(*line, row, 2)?.to_string(),
            users_t.field(*line, row, 3)?.to_string(),
        ));
    }
    let items_t = RawTable::read(&dir.join("ml-100k.item"), '\t', true)?;
    let mut movies = Vec::new();
    for (line, row) in &items_t.rows {
        let genres = row
            .get(3)
            .map(|c| c.split_whitespace().map(str::to_lowercase).collect())
            .unwrap_or_default();
        movies.push((items_t.field(*line, row, 0)?.to_string(), genres));
    }
    let inter_t = RawTable::read(&dir.join("ml-100k.inter"), '\t', true)?;
    let mut ratings = Vec::new();
    for (line, row) in &inter_t.rows {
        ratings.push((
            inter_t.field(*line, row, 0)?.to_string(),
            inter_t.field(*line, row, 1)?.to_string(),
            *line,
            inter_t.path.clone(),
        ));
    }
    Ok(Raw {
        users,
        movies,
        ratings,
    })
}

const ORIGINAL_GENRES: [&str; 19] = [
    "unknown",
    "action",
    "adventure",
    "animation",
    "children's",
    "comedy",
    "crime",
    "documentary",
    "drama",
    "fantasy",
    "film-noir",
    "horror",
    "musical",
    "mystery",
    "romance",
    "sci-fi",
    "thriller",
    "war",
    "western",
];

/// The original `u.user`, `u.item` and `u.data` files.
fn read_original(dir: &Path) -> Result<Raw> {
    let users_t = RawTable::read(&dir.join("u.user"), '|', false)?;
    let mut users = Vec::new();
    for (line, row) in &users_t.rows {
        let age = parse_age(&users_t, *line, users_t.field(*line, row, 1)?)?;
        users.push((
            users_t.field(*line, row, 0)?.to_string(),
            age,
            users_t.field(*line, row, 2)?.to_string(),
            users_t.field(*line, row, 3)?.to_string(),
        ));
    }
    let items_t = RawTable::read(&dir.join("u.item"), '|', false)?;
    let mut movies = Vec::new();
    for (line, row) in &items_t.rows {
        let mut genres = BTreeSet::new();
        for (g, name) in ORIGINAL_GENRES.iter().enumerate() {
            if items_t.field(*line, row, 5 + g)? == "1" {
                genres.insert(name.to_string());
            }
        }
        movies.push((items_t.field(*line, row, 0)?.to_string(), genres));
    }
    let data_t = RawTable::read(&dir.join("u.data"), '\t', false)?;
    let mut ratings = Vec::new();
    for (line, row) in &data_t.rows {
        ratings.push((
            data_t.field(*line, row, 0)?.to_string(),
            data_t.field(*line, row, 1)?.to_string(),
            *line,
            data_t.path.clone(),
        ));
    }
    Ok(Raw {
        users,
        movies,
        ratings,
    })
}

fn build(raw: Raw) -> Result<RelationalDatabase> {
    let occupations: BTreeSet<String> = raw.users.iter().map(|u| u.3.clone()).collect();
    let genders: BTreeSet<String> = raw.users.iter().map(|u| u.2.clone()).collect();
    let mut s = Schema::new();
    s.add_population("user")?;
    s.add_population("movie")?;
    let cat = |v: Vec<String>| AttributeRange::Categorical(v);
    let attrs = [
        (
            "age",
            "user",
            cat(vec!["age_1".into(), "age_2".into(), "age_3".into()]),
        ),
        ("gender", "user", cat(genders.into_iter().collect())),
        ("occupation", "user", cat(occupations.into_iter().collect())),
    ];
    for (name, pop, range) in attrs {
        s.add_attribute(AttributeDecl {
            name: name.into(),
            population: pop.into(),
            range,
        })?;
    }
    for g in GENRES {
        s.add_attribute(AttributeDecl {
            name: g.into(),
            population: "movie".into(),
            range: AttributeRange::Boolean,
        })?;
    }
    s.add_relation(RelationDecl {
        name: "rated".into(),
        populations: ["user".into(), "movie".into()],
    })?;
    let user_ids: Vec<String> = raw.users.iter().map(|u| u.0.clone()).collect();
    let movie_ids: Vec<String> = raw.movies.iter().map(|m| m.0.clone()).collect();
    let uidx: HashMap<&str, usize> = user_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let midx: HashMap<&str, usize> = movie_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut pairs = BTreeSet::new();
    for (u, m, line, path) in &raw.ratings {
        let unknown = |what: &str, id: &str| RlrError::Load {
            file: path.clone(),
            line: *line,
            message: format!("unknown {what} `{id}`"),
        };
        let a = *uidx.get(u.as_str()).ok_or_else(|| unknown("user", u))?;
        let b = *midx.get(m.as_str()).ok_or_else(|| unknown("movie", m))?;
        pairs.insert((a, b));
    }
    let column = |f: &dyn Fn(&UserRow) -> String| -> Vec<Option<String>> {
        raw.users.iter().map(|u| Some(f(u))).collect()
    };
    let mut b = RelationalDatabase::builder(s)
        .population("user", user_ids.clone())?
        .population("movie", movie_ids.clone())?
        .discrete("age", &column(&|u| age_class(u.1).to_string()))?
        .discrete("gender", &column(&|u| u.2.clone()))?
        .discrete("occupation", &column(&|u| u.3.clone()))?;
    for g in GENRES {
        let v: Vec<bool> = raw.movies.iter().map(|m| m.1.contains(g)).collect();
        b = b.boolean(g, &v)?;
    }
    b.relation("rated", pairs.into_iter().collect())?.build()
}

/// Reads MovieLens-100k from `src` (either the tab-separated
/// `ml-100k.{user,item,inter}` files or the original `u.user`, `u.item`,
/// `u.data`), keeps whether a user rated a movie and drops the rating, and
/// writes tables plus `gender.toml` and `age.toml` manifests to `out`.
pub fn convert_movielens(src: &Path, out: &Path) -> Result<MovieLensSummary> {
    let raw = if src.join("ml-100k.user").exists() {
        read_atomic(src)?
    } else if src.join("u.user").exists() {
        read_original(src)?
    } else {
        return Err(RlrError::Config(format!(
            "{}: no ml-100k.user or u.user found",
            src.display()
        )));
    };
    let db = build(raw)?;
    let gender = TargetDecl {
        attribute: "gender".into(),
        positive: "F".into(),
        var: "u".into(),
        merge: BTreeMap::new(),
    };
    let manifest = write_tables(&db, out, gender)?;
    let gender_manifest = out.join("gender.toml");
    write_manifest(&manifest, &gender_manifest)?;
    let mut age = manifest;
    age.target = TargetDecl {
        attribute: "age".into(),
        positive: "age_3".into(),
        var: "u".into(),
        merge: BTreeMap::from([(
            "age_1_2".to_string(),
            vec!["age_1".to_string(), "age_2".to_string()],
        )]),
    };
    let age_manifest = out.join("age.toml");
    write_manifest(&age, &age_manifest)?;
    Ok(MovieLensSummary {
        users: db.population_size("user"),
        movies: db.population_size("movie"),
        ratings: db.relation("rated").map_or(0, |r| r.len()),
        gender_manifest,
        age_manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::manifest::{load_database, DatasetManifest};

    #[test]
    fn age_bands() {
        assert_eq!(age_class(7), "age_1");
        assert_eq!(age_class(24), "age_1");
        assert_eq!(age_class(25), "age_2");
        assert_eq!(age_class(35), "age_2");
        assert_eq!(age_class(36), "age_3");
    }

    #[test]
    fn converts_original_layout() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        std::fs::write(
            src.path().join("u.user"),
            "1|24|M|technician|85711\n2|53|F|other|94043\n3|30|M|writer|32067\n",
        )
        .unwrap();
        let flags = |hot: &[usize]| -> String {
            (0..19)
                .map(|i| if hot.contains(&i) { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join("|")
        };
        std::fs::write(
            src.path().join("u.item"),
            format!(
                "1|Toy Story (1995)|01-Jan-1995||http://x|{}\n2|GoldenEye (1995)|01-Jan-1995||http://y|{}\n",
                flags(&[3, 4, 5]),
                flags(&[1, 2, 16])
            ),
        )
        .unwrap();
        std::fs::write(
            src.path().join("u.data"),
            "1\t2\t5\t1\n2\t1\t3\t2\n2\t2\t1\t3\n3\t1\t4\t4\n",
        )
        .unwrap();
        let summary = convert_movielens(src.path(), out.path()).unwrap();
        assert_eq!((summary.users, summary.movies, summary.ratings), (3, 2, 4));
        let m = DatasetManifest::load(&summary.gender_manifest).unwrap();
        let db = load_database(&m).unwrap();
        let t = m.target_spec(db.schema()).unwrap();
        assert_eq!(db.labels(&t), vec![Some(false), Some(true), Some(false)]);
        assert_eq!(db.discrete_value("action", 1), Some("true"));
        assert_eq!(db.discrete_value("action", 0), Some("false"));
        let m = DatasetManifest::load(&summary.age_manifest).unwrap();
        let db = load_database(&m).unwrap();
        let t = m.target_spec(db.schema()).unwrap();
        assert_eq!(db.labels(&t), vec![Some(false), Some(true), Some(false)]);
    }
}
