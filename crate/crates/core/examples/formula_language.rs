//! Parsing formulae over a users-and-movies schema, canonical forms,
//! variable roles and the chain checks used by structure search.

use rlr::schema::{
    classify_variables, is_chain, is_targeted_chain, literal_counts, AttributeDecl, AttributeRange,
    RelationDecl,
};
use rlr::{Formula, Schema, TargetSpec};

fn main() -> rlr::Result<()> {
    let mut s = Schema::new();
    s.add_population("user")?;
    s.add_population("movie")?;
    s.add_attribute(AttributeDecl {
        name: "gender".into(),
        population: "user".into(),
        range: AttributeRange::Categorical(vec!["F".into(), "M".into()]),
    })?;
    s.add_attribute(AttributeDecl {
        name: "age".into(),
        population: "user".into(),
        range: AttributeRange::Categorical(vec!["young".into(), "old".into()]),
    })?;
    for g in ["drama", "comedy"] {
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
    let target = TargetSpec::new(&s, "gender", "u", "F")?;

    for text in [
        "rated(u,m) * rated(v,m) * rated(v,n) * comedy(m)",
        "drama(m) * comedy(m)",
        "age(u)=young * comedy(m)",
        "comedy(x) * rated(u,x)",
        "True",
    ] {
        let f = Formula::parse(text, &s)?;
        let (bl, ul) = literal_counts(&f);
        println!("{text}");
        println!("  canonical      {}", f.canonical(&target));
        println!("  literals       {bl} binary, {ul} unary");
        println!("  chain          {}", is_chain(&f));
        println!("  targeted chain {}", is_targeted_chain(&f, &target));
        for (var, roles) in classify_variables(&f, &target) {
            println!("  {var:<4} {roles:?}");
        }
    }

    match Formula::parse("rated(u,m) * gender(m)=F", &s) {
        Ok(f) => println!("unexpected: {f}"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
