//! Grounding the weighted formulae of the friends/happiness model into a
//! flat count matrix, one row per person.

use rlr::grounding::build_design_matrix;
use rlr::schema::{AttributeDecl, AttributeRange, RelationDecl};
use rlr::{Formula, RelationalDatabase, RlrModel, Schema, TargetSpec, WeightedFormula};

fn main() -> rlr::Result<()> {
    let mut s = Schema::new();
    s.add_population("person")?;
    for a in ["kind", "happy"] {
        s.add_attribute(AttributeDecl {
            name: a.into(),
            population: "person".into(),
            range: AttributeRange::Boolean,
        })?;
    }
    s.add_relation(RelationDecl {
        name: "friend".into(),
        populations: ["person".into(), "person".into()],
    })?;

    // Four labelled people; the others form a pool of 10 kind and 16 unkind friends.
    let people: [(usize, usize, bool); 4] =
        [(5, 3, true), (18, 2, false), (1, 1, true), (12, 10, true)];
    let n = 4 + 10 + 16;
    let kind: Vec<bool> = (0..n).map(|i| (4..14).contains(&i)).collect();
    let mut happy: Vec<Option<&str>> = vec![None; n];
    let mut friends = Vec::new();
    for (p, &(total, kind_count, label)) in people.iter().enumerate() {
        happy[p] = Some(if label { "true" } else { "false" });
        friends.extend((0..kind_count).map(|j| (p, 4 + j)));
        friends.extend((0..total - kind_count).map(|j| (p, 14 + j)));
    }
    let db = RelationalDatabase::builder(s)
        .anonymous_population("person", n)?
        .boolean("kind", &kind)?
        .discrete("happy", &happy)?
        .relation("friend", friends)?
        .build()?;
    let target = TargetSpec::new(db.schema(), "happy", "z", "true")?;

    let formulas: Vec<Formula> = ["True", "friend(z,y)", "friend(z,y) * kind(y)"]
        .iter()
        .map(|t| Formula::parse(t, db.schema()))
        .collect::<rlr::Result<_>>()?;
    let m = build_design_matrix(&formulas, &target, &db, None)?;
    m.write_csv(std::io::stdout()).expect("stdout");

    let model = RlrModel::new(
        vec![
            WeightedFormula::new(formulas[0].clone(), -4.5)?,
            WeightedFormula::new(formulas[2].clone(), 1.0)?,
        ],
        target,
        0.75,
        0.0,
    )?;
    for (z, p) in model.rlr_predict_all(&db).iter().take(4).enumerate() {
        println!("P(happy({z})) = {p:.4}");
    }
    Ok(())
}
