//! The ground world: individuals, attribute values and relation tuples.

use std::collections::{HashMap, HashSet};

use crate::error::{Result, RlrError};
use crate::schema::{AttributeDecl, AttributeRange, Schema, TargetSpec};

#[derive(Debug, Clone)]
pub struct Population {
    name: String,
    individuals: Vec<String>,
    index: HashMap<String, usize>,
}

impl Population {
    pub fn new(name: &str, individuals: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(individuals.len());
        for (i, id) in individuals.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(RlrError::validation(format!(
                    "individual `{id}` appears twice in population `{name}`"
                )));
            }
        }
        Ok(Population {
            name: name.to_string(),
            individuals,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn individuals(&self) -> &[String] {
        &self.individuals
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum AttributeValues {
    /// Index into the declared value list; `None` is unobserved.
    Discrete(Vec<Option<u32>>),
    Continuous(Vec<f64>),
}

/// A binary relation stored as a tuple set with adjacency lists both ways.
#[derive(Debug, Clone)]
pub struct Relation {
    forward: Vec<Vec<u32>>,
    backward: Vec<Vec<u32>>,
    set: HashSet<(u32, u32)>,
}

impl Relation {
    fn new(sizes: (usize, usize), mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut forward = vec![Vec::new(); sizes.0];
        let mut backward = vec![Vec::new(); sizes.1];
        for &(a, b) in &pairs {
            forward[a as usize].push(b);
            backward[b as usize].push(a);
        }
        Relation {
            forward,
            backward,
            set: pairs.into_iter().collect(),
        }
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.set.contains(&(a as u32, b as u32))
    }

    /// Individuals `b` with `R(a, b)`, ascending.
    pub fn successors(&self, a: usize) -> &[u32] {
        &self.forward[a]
    }

    /// Individuals `a` with `R(a, b)`, ascending.
    pub fn predecessors(&self, b: usize) -> &[u32] {
        &self.backward[b]
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// All tuples in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.forward
            .iter()
            .enumerate()
            .flat_map(|(a, bs)| bs.iter().map(move |b| (a, *b as usize)))
    }
}

/// Immutable once built. Attribute maps are total except where a value was
/// explicitly left unobserved (used for unlabeled target rows).
#[derive(Debug, Clone)]
pub struct RelationalDatabase {
    schema: Schema,
    populations: HashMap<String, Population>,
    attributes: HashMap<String, AttributeValues>,
    relations: HashMap<String, Relation>,
}

impl RelationalDatabase {
    pub fn builder(schema: Schema) -> DatabaseBuilder {
        DatabaseBuilder {
            schema,
            populations: HashMap::new(),
            attributes: HashMap::new(),
            relations: HashMap::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn population(&self, name: &str) -> Option<&Population> {
        self.populations.get(name)
    }

    pub fn population_size(&self, name: &str) -> usize {
        self.populations.get(name).map_or(0, Population::len)
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    /// Code of `value` within the attribute's declared range.
    pub fn value_code(&self, attribute: &str, value: &str) -> Option<u32> {
        let decl = self.schema.attribute(attribute)?;
        decl.range
            .values()?
            .iter()
            .position(|v| *v == value)
            .map(|p| p as u32)
    }

    pub fn discrete_code(&self, attribute: &str, individual: usize) -> Option<u32> {
        match self.attributes.get(attribute)? {
            AttributeValues::Discrete(codes) => codes[individual],
            AttributeValues::Continuous(_) => None,
        }
    }

    pub fn discrete_value(&self, attribute: &str, individual: usize) -> Option<&str> {
        let code = self.discrete_code(attribute, individual)?;
        let decl = self.schema.attribute(attribute)?;
        match &decl.range {
            AttributeRange::Boolean => Some(if code == 1 { "true" } else { "false" }),
            AttributeRange::Categorical(values) => Some(values[code as usize].as_str()),
            AttributeRange::Continuous => None,
        }
    }

    pub fn continuous_value(&self, attribute: &str, individual: usize) -> Option<f64> {
        match self.attributes.get(attribute)? {
            AttributeValues::Continuous(v) => Some(v[individual]),
            AttributeValues::Discrete(_) => None,
        }
    }

    pub(crate) fn attribute_values(&self, attribute: &str) -> Option<&AttributeValues> {
        self.attributes.get(attribute)
    }

    pub fn continuous_values(&self, attribute: &str) -> Option<&[f64]> {
        match self.attributes.get(attribute)? {
            AttributeValues::Continuous(v) => Some(v),
            AttributeValues::Discrete(_) => None,
        }
    }

    /// Label of each individual of the target population; `None` when the
    /// target attribute is unobserved.
    pub fn labels(&self, target: &TargetSpec) -> Vec<Option<bool>> {
        let positive = self.value_code(&target.attribute, &target.positive);
        (0..self.population_size(&target.population))
            .map(|i| {
                self.discrete_code(&target.attribute, i)
                    .map(|c| Some(c) == positive)
            })
            .collect()
    }

    /// A copy with one more continuous attribute.
    pub fn with_continuous_attribute(&self, decl: AttributeDecl, values: Vec<f64>) -> Result<Self> {
        if decl.range != AttributeRange::Continuous {
            return Err(RlrError::validation(format!(
                "`{}` must be continuous",
                decl.name
            )));
        }
        let size = self.population_size(&decl.population);
        if values.len() != size {
            return Err(RlrError::validation(format!(
                "`{}` needs {size} values, got {}",
                decl.name,
                values.len()
            )));
        }
        let mut out = self.clone();
        let name = decl.name.clone();
        out.schema.add_attribute(decl)?;
        out.attributes
            .insert(name, AttributeValues::Continuous(values));
        Ok(out)
    }

    /// Replaces the values of an existing continuous attribute.
    pub fn replace_continuous(&mut self, attribute: &str, values: Vec<f64>) -> Result<()> {
        match self.attributes.get_mut(attribute) {
            Some(AttributeValues::Continuous(v)) if v.len() == values.len() => {
                *v = values;
                Ok(())
            }
            _ => Err(RlrError::validation(format!(
                "`{attribute}` is not a continuous attribute with {} values",
                values.len()
            ))),
        }
    }
}

pub struct DatabaseBuilder {
    schema: Schema,
    populations: HashMap<String, Population>,
    attributes: HashMap<String, AttributeValues>,
    relations: HashMap<String, Vec<(u32, u32)>>,
}

impl DatabaseBuilder {
    pub fn population(mut self, name: &str, individuals: Vec<String>) -> Result<Self> {
        if !self.schema.has_population(name) {
            return Err(RlrError::validation(format!(
                "undeclared population `{name}`"
            )));
        }
        self.populations
            .insert(name.to_string(), Population::new(name, individuals)?);
        Ok(self)
    }

    /// Population with individuals named `0..size`.
    pub fn anonymous_population(self, name: &str, size: usize) -> Result<Self> {
        self.population(name, (0..size).map(|i| i.to_string()).collect())
    }

    /// Discrete values in population order; `None` leaves an individual unobserved.
    pub fn discrete<S: AsRef<str>>(
        mut self,
        attribute: &str,
        values: &[Option<S>],
    ) -> Result<Self> {
        let decl = self
            .schema
            .attribute(attribute)
            .ok_or_else(|| RlrError::validation(format!("undeclared attribute `{attribute}`")))?;
        let range = decl
            .range
            .values()
            .ok_or_else(|| RlrError::validation(format!("`{attribute}` is continuous")))?;
        let codes = values
            .iter()
            .map(|v| match v {
                None => Ok(None),
                Some(v) => range
                    .iter()
                    .position(|r| *r == v.as_ref())
                    .map(|p| Some(p as u32))
                    .ok_or_else(|| {
                        RlrError::validation(format!(
                            "`{}` is not a value of `{attribute}`",
                            v.as_ref()
                        ))
                    }),
            })
            .collect::<Result<Vec<_>>>()?;
        self.attributes
            .insert(attribute.to_string(), AttributeValues::Discrete(codes));
        Ok(self)
    }

    pub fn boolean(self, attribute: &str, values: &[bool]) -> Result<Self> {
        let v: Vec<Option<&str>> = values
            .iter()
            .map(|b| Some(if *b { "true" } else { "false" }))
            .collect();
        self.discrete(attribute, &v)
    }

    pub fn continuous(mut self, attribute: &str, values: Vec<f64>) -> Result<Self> {
        match self.schema.attribute(attribute) {
            Some(d) if d.range == AttributeRange::Continuous => {}
            _ => {
                return Err(RlrError::validation(format!(
                    "`{attribute}` is not a declared continuous attribute"
                )))
            }
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(RlrError::validation(format!(
                "`{attribute}` has non-finite value {bad}"
            )));
        }
        self.attributes
            .insert(attribute.to_string(), AttributeValues::Continuous(values));
        Ok(self)
    }

    /// Tuples as population indices.
    pub fn relation(mut self, name: &str, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if self.schema.relation(name).is_none() {
            return Err(RlrError::validation(format!(
                "undeclared relation `{name}`"
            )));
        }
        self.relations.insert(
            name.to_string(),
            pairs
                .into_iter()
                .map(|(a, b)| (a as u32, b as u32))
                .collect(),
        );
        Ok(self)
    }

    /// Checks every declaration has data of the right shape.
    pub fn build(self) -> Result<RelationalDatabase> {
        let DatabaseBuilder {
            schema,
            mut populations,
            attributes,
            relations,
        } = self;
        for pop in schema.populations() {
            populations
                .entry(pop.clone())
                .or_insert_with(|| Population::new(pop, Vec::new()).expect("empty population"));
        }
        for decl in schema.attributes() {
            let size = populations[&decl.population].len();
            let len = match attributes.get(&decl.name) {
                None => {
                    return Err(RlrError::validation(format!(
                        "no values for attribute `{}`",
                        decl.name
                    )))
                }
                Some(AttributeValues::Discrete(v)) => v.len(),
                Some(AttributeValues::Continuous(v)) => v.len(),
            };
            if len != size {
                return Err(RlrError::validation(format!(
                    "attribute `{}` has {len} values for {size} individuals",
                    decl.name
                )));
            }
        }
        let mut built = HashMap::new();
        for decl in schema.relations() {
            let sizes = (
                populations[&decl.populations[0]].len(),
                populations[&decl.populations[1]].len(),
            );
            let pairs = relations.get(&decl.name).cloned().unwrap_or_default();
            if let Some((a, b)) = pairs
                .iter()
                .find(|(a, b)| *a as usize >= sizes.0 || *b as usize >= sizes.1)
            {
                return Err(RlrError::validation(format!(
                    "relation `{}` tuple ({a}, {b}) is out of range",
                    decl.name
                )));
            }
            built.insert(decl.name.clone(), Relation::new(sizes, pairs));
        }
        Ok(RelationalDatabase {
            schema,
            populations,
            attributes,
            relations: built,
        })
    }
}
