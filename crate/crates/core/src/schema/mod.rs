//! Relational vocabulary: populations, attribute and relation declarations,
//! the weighted-formula language and the target specification.

mod formula;
mod parse;
mod roles;

use std::collections::HashMap;
use std::fmt;

pub use formula::{Formula, Literal, WeightedFormula};
pub use roles::{classify_variables, is_chain, is_targeted_chain, literal_counts, Role};

use crate::error::{Result, RlrError};

/// Value stored for boolean attributes whose literal reads `a(x)`.
pub const TRUE_VALUE: &str = "true";
/// Value stored for boolean attributes whose literal reads `a(x)=false`.
pub const FALSE_VALUE: &str = "false";

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeRange {
    Boolean,
    Categorical(Vec<String>),
    Continuous,
}

impl AttributeRange {
    /// Discrete values of the range, `None` for continuous attributes.
    pub fn values(&self) -> Option<Vec<&str>> {
        match self {
            AttributeRange::Boolean => Some(vec![FALSE_VALUE, TRUE_VALUE]),
            AttributeRange::Categorical(values) => {
                Some(values.iter().map(String::as_str).collect())
            }
            AttributeRange::Continuous => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, AttributeRange::Continuous)
    }

    pub fn contains(&self, value: &str) -> bool {
        match self {
            AttributeRange::Boolean => value == TRUE_VALUE || value == FALSE_VALUE,
            AttributeRange::Categorical(values) => values.iter().any(|v| v == value),
            AttributeRange::Continuous => false,
        }
    }
}

/// A unary function symbol `F(x)` over one population.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDecl {
    pub name: String,
    pub population: String,
    pub range: AttributeRange,
}

/// A binary predicate `R(x, y)` over an ordered pair of populations.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationDecl {
    pub name: String,
    pub populations: [String; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decl {
    Attribute(usize),
    Relation(usize),
}

/// Declarations only; individuals and values live in
/// [`RelationalDatabase`](crate::database::RelationalDatabase).
#[derive(Debug, Clone, Default)]
pub struct Schema {
    populations: Vec<String>,
    attributes: Vec<AttributeDecl>,
    relations: Vec<RelationDecl>,
    names: HashMap<String, Decl>,
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_population(&mut self, name: &str) -> Result<()> {
        if !is_identifier(name) {
            return Err(RlrError::validation(format!(
                "`{name}` is not a valid population name"
            )));
        }
        if self.has_population(name) {
            return Err(RlrError::validation(format!(
                "population `{name}` declared twice"
            )));
        }
        self.populations.push(name.to_string());
        Ok(())
    }

    pub fn add_attribute(&mut self, decl: AttributeDecl) -> Result<()> {
        self.check_new_name(&decl.name)?;
        if !self.has_population(&decl.population) {
            return Err(RlrError::validation(format!(
                "attribute `{}` refers to unknown population `{}`",
                decl.name, decl.population
            )));
        }
        if let AttributeRange::Categorical(values) = &decl.range {
            let mut distinct = values.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() != values.len() || values.len() < 2 {
                return Err(RlrError::validation(format!(
                    "categorical attribute `{}` needs at least two distinct values",
                    decl.name
                )));
            }
            if let Some(bad) = values.iter().find(|v| !is_value_token(v)) {
                return Err(RlrError::validation(format!(
                    "value `{bad}` of attribute `{}` cannot be written in formula syntax",
                    decl.name
                )));
            }
        }
        self.names
            .insert(decl.name.clone(), Decl::Attribute(self.attributes.len()));
        self.attributes.push(decl);
        Ok(())
    }

    pub fn add_relation(&mut self, decl: RelationDecl) -> Result<()> {
        self.check_new_name(&decl.name)?;
        for pop in &decl.populations {
            if !self.has_population(pop) {
                return Err(RlrError::validation(format!(
                    "relation `{}` refers to unknown population `{pop}`",
                    decl.name
                )));
            }
        }
        self.names
            .insert(decl.name.clone(), Decl::Relation(self.relations.len()));
        self.relations.push(decl);
        Ok(())
    }

    fn check_new_name(&self, name: &str) -> Result<()> {
        if !is_identifier(name) || name == "True" {
            return Err(RlrError::validation(format!(
                "`{name}` is not a valid declaration name"
            )));
        }
        if self.names.contains_key(name) {
            return Err(RlrError::validation(format!("`{name}` declared twice")));
        }
        Ok(())
    }

    pub fn has_population(&self, name: &str) -> bool {
        self.populations.iter().any(|p| p == name)
    }

    pub fn populations(&self) -> &[String] {
        &self.populations
    }

    pub fn attributes(&self) -> &[AttributeDecl] {
        &self.attributes
    }

    pub fn relations(&self) -> &[RelationDecl] {
        &self.relations
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDecl> {
        match self.names.get(name) {
            Some(Decl::Attribute(i)) => Some(&self.attributes[*i]),
            _ => None,
        }
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        match self.names.get(name) {
            Some(Decl::Relation(i)) => Some(&self.relations[*i]),
            _ => None,
        }
    }
}

pub(crate) fn is_value_token(value: &str) -> bool {
    !value.is_empty()
        && value
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '*' | '(' | ')' | ',' | '=' | '\t'))
}

/// The Boolean PRV `Q(z)` being predicted: a discrete attribute of one
/// population, the logical variable standing for the row individual, and the
/// value treated as label 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub attribute: String,
    pub population: String,
    pub var: String,
    pub positive: String,
}

impl TargetSpec {
    pub fn new(schema: &Schema, attribute: &str, var: &str, positive: &str) -> Result<Self> {
        let decl = schema.attribute(attribute).ok_or_else(|| {
            RlrError::validation(format!("unknown target attribute `{attribute}`"))
        })?;
        let values = decl.range.values().ok_or_else(|| {
            RlrError::validation(format!(
                "target attribute `{attribute}` must be boolean or categorical"
            ))
        })?;
        if values.len() != 2 {
            return Err(RlrError::validation(format!(
                "target attribute `{attribute}` has {} classes; merge classes down to two",
                values.len()
            )));
        }
        if !decl.range.contains(positive) {
            return Err(RlrError::validation(format!(
                "positive class `{positive}` is not a value of `{attribute}`"
            )));
        }
        if !is_identifier(var) {
            return Err(RlrError::validation(format!(
                "`{var}` is not a valid logical variable"
            )));
        }
        Ok(TargetSpec {
            attribute: attribute.to_string(),
            population: decl.population.clone(),
            var: var.to_string(),
            positive: positive.to_string(),
        })
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})={}", self.attribute, self.var, self.positive)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Users rate movies; users have age and gender, movies have genres.
    pub fn movie_schema() -> Schema {
        let mut s = Schema::new();
        s.add_population("user").unwrap();
        s.add_population("movie").unwrap();
        s.add_attribute(AttributeDecl {
            name: "gender".into(),
            population: "user".into(),
            range: AttributeRange::Categorical(vec!["F".into(), "M".into()]),
        })
        .unwrap();
        s.add_attribute(AttributeDecl {
            name: "age".into(),
            population: "user".into(),
            range: AttributeRange::Categorical(vec!["old".into(), "young".into()]),
        })
        .unwrap();
        for genre in ["drama", "comedy"] {
            s.add_attribute(AttributeDecl {
                name: genre.into(),
                population: "movie".into(),
                range: AttributeRange::Boolean,
            })
            .unwrap();
        }
        s.add_relation(RelationDecl {
            name: "rated".into(),
            populations: ["user".into(), "movie".into()],
        })
        .unwrap();
        s
    }

    pub fn gender_target(s: &Schema) -> TargetSpec {
        TargetSpec::new(s, "gender", "u", "F").unwrap()
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut s = movie_schema();
        let err = s.add_relation(RelationDecl {
            name: "drama".into(),
            populations: ["user".into(), "movie".into()],
        });
        assert!(err.is_err());
    }

    #[test]
    fn rejects_single_valued_categorical() {
        let mut s = movie_schema();
        let err = s.add_attribute(AttributeDecl {
            name: "occupation".into(),
            population: "user".into(),
            range: AttributeRange::Categorical(vec!["x".into(), "x".into()]),
        });
        assert!(err.is_err());
    }

    #[test]
    fn target_must_be_binary_discrete() {
        let mut s = movie_schema();
        s.add_attribute(AttributeDecl {
            name: "occupation".into(),
            population: "user".into(),
            range: AttributeRange::Categorical(vec!["a".into(), "b".into(), "c".into()]),
        })
        .unwrap();
        assert!(TargetSpec::new(&s, "occupation", "u", "a").is_err());
        assert!(TargetSpec::new(&s, "gender", "u", "X").is_err());
        assert!(TargetSpec::new(&s, "gender", "u", "M").is_ok());
    }
}
