#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlr::schema::{AttributeDecl, AttributeRange, RelationDecl};
use rlr::{Formula, Literal, RelationalDatabase, Schema, TargetSpec};

/// Two populations with Boolean, categorical and continuous attributes,
/// one cross relation and one self relation. Target `t(z)` on `a`.
pub fn mixed_schema() -> Schema {
    let mut s = Schema::new();
    s.add_population("a").unwrap();
    s.add_population("b").unwrap();
    let attrs = [
        ("t", "a", AttributeRange::Boolean),
        ("p", "a", AttributeRange::Boolean),
        (
            "c",
            "a",
            AttributeRange::Categorical(vec!["x".into(), "y".into(), "w".into()]),
        ),
        ("q", "b", AttributeRange::Boolean),
        ("v", "b", AttributeRange::Continuous),
    ];
    for (name, pop, range) in attrs {
        s.add_attribute(AttributeDecl {
            name: name.into(),
            population: pop.into(),
            range,
        })
        .unwrap();
    }
    for (name, from, to) in [("r", "a", "b"), ("s", "a", "a")] {
        s.add_relation(RelationDecl {
            name: name.into(),
            populations: [from.into(), to.into()],
        })
        .unwrap();
    }
    s
}

/// A random database over [`mixed_schema`] with at most `max` individuals
/// per population.
pub fn random_mixed_db(seed: u64, max: usize) -> (RelationalDatabase, TargetSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = rng.gen_range(1..=max);
    let nb = rng.gen_range(1..=max);
    let density: f64 = rng.gen_range(0.1..0.9);
    let bools = |rng: &mut ChaCha8Rng, n: usize| -> Vec<bool> {
        (0..n).map(|_| rng.gen_bool(0.5)).collect()
    };
    let t: Vec<Option<&str>> = (0..na)
        .map(|_| match rng.gen_range(0..3) {
            0 => None,
            1 => Some("true"),
            _ => Some("false"),
        })
        .collect();
    let p = bools(&mut rng, na);
    let c: Vec<Option<&str>> = (0..na)
        .map(|_| Some(["x", "y", "w"][rng.gen_range(0..3)]))
        .collect();
    let q = bools(&mut rng, nb);
    // quarter steps keep every product and sum of counts exact in f64
    let v: Vec<f64> = (0..nb)
        .map(|_| rng.gen_range(-8i32..=8) as f64 / 4.0)
        .collect();
    let mut r = Vec::new();
    for i in 0..na {
        for j in 0..nb {
            if rng.gen_bool(density) {
                r.push((i, j));
            }
        }
    }
    let mut s = Vec::new();
    for i in 0..na {
        for j in 0..na {
            if rng.gen_bool(density) {
                s.push((i, j));
            }
        }
    }
    let db = RelationalDatabase::builder(mixed_schema())
        .anonymous_population("a", na)
        .unwrap()
        .anonymous_population("b", nb)
        .unwrap()
        .discrete("t", &t)
        .unwrap()
        .boolean("p", &p)
        .unwrap()
        .discrete("c", &c)
        .unwrap()
        .boolean("q", &q)
        .unwrap()
        .continuous("v", v)
        .unwrap()
        .relation("r", r)
        .unwrap()
        .relation("s", s)
        .unwrap()
        .build()
        .unwrap();
    let target = TargetSpec::new(db.schema(), "t", "z", "true").unwrap();
    (db, target)
}

enum Slot<'a> {
    Relation(&'a rlr::Relation, usize, usize),
    Equals(String, usize, String),
    Continuous(String, usize),
}

/// Sum over every assignment of the non-target variables of the product of
/// the literals, with `target.var` bound to `z`. Each literal is read
/// straight from the database accessors.
pub fn brute_force_count(
    f: &Formula,
    target: &TargetSpec,
    z: usize,
    db: &RelationalDatabase,
) -> f64 {
    let mut names: Vec<&str> = vec![target.var.as_str()];
    let mut sizes: Vec<usize> = vec![1];
    for (v, pop) in f.vars() {
        if *v != target.var {
            names.push(v);
            sizes.push(db.population_size(pop));
        }
    }
    if sizes.contains(&0) {
        return 0.0;
    }
    let pos = |v: &str| names.iter().position(|n| *n == v).unwrap();
    let slots: Vec<Slot> = f
        .literals()
        .iter()
        .map(|l| match l {
            Literal::Relation { name, args } => {
                Slot::Relation(db.relation(name).unwrap(), pos(&args[0]), pos(&args[1]))
            }
            Literal::Equals {
                attribute,
                var,
                value,
            } => Slot::Equals(attribute.clone(), pos(var), value.clone()),
            Literal::Continuous { attribute, var } => Slot::Continuous(attribute.clone(), pos(var)),
        })
        .collect();
    let mut idx = vec![0usize; sizes.len()];
    let mut total = 0.0;
    loop {
        let at = |i: usize| if i == 0 { z } else { idx[i] };
        let mut product = 1.0;
        for s in &slots {
            if product == 0.0 {
                break;
            }
            product *= match s {
                Slot::Relation(rel, a, b) => f64::from(u8::from(rel.contains(at(*a), at(*b)))),
                Slot::Equals(attr, v, value) => f64::from(u8::from(
                    db.discrete_value(attr, at(*v)) == Some(value.as_str()),
                )),
                Slot::Continuous(attr, v) => db.continuous_value(attr, at(*v)).unwrap(),
            };
        }
        total += product;
        let mut p = 1;
        loop {
            if p == idx.len() {
                return total;
            }
            idx[p] += 1;
            if idx[p] < sizes[p] {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// People `0..4` with (friends, kind friends, happy) of (5,3,yes),
/// (18,2,no), (1,1,yes), (12,10,yes); the rest are 10 kind and 16 unkind
/// friends without a recorded label.
pub fn happy_world() -> (RelationalDatabase, TargetSpec) {
    let mut s = Schema::new();
    s.add_population("person").unwrap();
    for a in ["kind", "happy"] {
        s.add_attribute(AttributeDecl {
            name: a.into(),
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
    let people = [(5, 3, true), (18, 2, false), (1, 1, true), (12, 10, true)];
    let n = 30;
    let kind: Vec<bool> = (0..n).map(|i| (4..14).contains(&i)).collect();
    let mut happy: Vec<Option<&str>> = vec![None; n];
    let mut friends = Vec::new();
    for (p, &(total, kinds, label)) in people.iter().enumerate() {
        happy[p] = Some(if label { "true" } else { "false" });
        friends.extend((0..kinds).map(|j| (p, 4 + j)));
        friends.extend((0..total - kinds).map(|j| (p, 14 + j)));
    }
    let db = RelationalDatabase::builder(s)
        .anonymous_population("person", n)
        .unwrap()
        .boolean("kind", &kind)
        .unwrap()
        .discrete("happy", &happy)
        .unwrap()
        .relation("friend", friends)
        .unwrap()
        .build()
        .unwrap();
    let target = TargetSpec::new(db.schema(), "happy", "z", "true").unwrap();
    (db, target)
}

/// Users, movies, `rated`, genres and a gender target, as in the structure
/// learning discussion.
pub fn movie_schema() -> (Schema, TargetSpec) {
    let mut s = Schema::new();
    s.add_population("user").unwrap();
    s.add_population("movie").unwrap();
    let attrs = [
        (
            "gender",
            "user",
            AttributeRange::Categorical(vec!["F".into(), "M".into()]),
        ),
        (
            "age",
            "user",
            AttributeRange::Categorical(vec!["young".into(), "old".into()]),
        ),
        ("drama", "movie", AttributeRange::Boolean),
        ("comedy", "movie", AttributeRange::Boolean),
    ];
    for (name, pop, range) in attrs {
        s.add_attribute(AttributeDecl {
            name: name.into(),
            population: pop.into(),
            range,
        })
        .unwrap();
    }
    s.add_relation(RelationDecl {
        name: "rated".into(),
        populations: ["user".into(), "movie".into()],
    })
    .unwrap();
    let t = TargetSpec::new(&s, "gender", "u", "F").unwrap();
    (s, t)
}

/// Central finite-difference derivative of `f` at `x` along coordinate `j`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[j] += h;
    b[j] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
