//! Text syntax: `True`, `rated(u,m) * drama(m)`, `age(u)=young`,
//! `drama(m)=false`, `h(m)` for continuous attributes.

use super::{is_identifier, is_value_token, AttributeRange, Formula, Literal, Schema, TRUE_VALUE};
use crate::error::{Result, RlrError};

pub(crate) fn parse_formula(text: &str, schema: &Schema) -> Result<Formula> {
    let trimmed = text.trim();
    if trimmed == "True" {
        return Ok(Formula::truth());
    }
    let mut literals = Vec::new();
    let mut offset = text.len() - text.trim_start().len();
    for part in trimmed.split('*') {
        literals.push(parse_literal(part, text, offset, schema)?);
        offset += part.len() + 1;
    }
    Formula::from_literals(literals, schema)
}

fn parse_literal(part: &str, input: &str, offset: usize, schema: &Schema) -> Result<Literal> {
    let err = |col: usize, message: String| RlrError::Parse {
        input: input.to_string(),
        column: offset + col + 1,
        message,
    };
    let lead = part.len() - part.trim_start().len();
    let part = part.trim();
    if part.is_empty() {
        return Err(err(lead, "empty literal".into()));
    }
    let open = part
        .find('(')
        .ok_or_else(|| err(lead, format!("expected `(` in `{part}`")))?;
    let close = part
        .find(')')
        .ok_or_else(|| err(lead + part.len(), format!("expected `)` in `{part}`")))?;
    if close < open {
        return Err(err(lead + close, "unbalanced parentheses".into()));
    }
    let symbol = part[..open].trim();
    if !is_identifier(symbol) {
        return Err(err(lead, format!("`{symbol}` is not an identifier")));
    }
    let args: Vec<&str> = part[open + 1..close].split(',').map(str::trim).collect();
    if let Some(bad) = args.iter().find(|a| !is_identifier(a)) {
        return Err(err(
            lead + open + 1,
            format!("`{bad}` is not a logical variable"),
        ));
    }
    let rest = part[close + 1..].trim();
    let value = if rest.is_empty() {
        None
    } else if let Some(v) = rest.strip_prefix('=') {
        let v = v.trim();
        if !is_value_token(v) {
            return Err(err(lead + close + 1, format!("`{v}` is not a value")));
        }
        Some(v)
    } else {
        return Err(err(lead + close + 1, format!("unexpected `{rest}`")));
    };

    if schema.relation(symbol).is_some() {
        if args.len() != 2 || value.is_some() {
            return Err(err(
                lead,
                format!("relation `{symbol}` takes two variables and no value"),
            ));
        }
        return Ok(Literal::relation(symbol, args[0], args[1]));
    }
    let decl = schema
        .attribute(symbol)
        .ok_or_else(|| err(lead, format!("undeclared symbol `{symbol}`")))?;
    if args.len() != 1 {
        return Err(err(
            lead,
            format!("attribute `{symbol}` takes one variable"),
        ));
    }
    match (&decl.range, value) {
        (AttributeRange::Continuous, None) => Ok(Literal::continuous(symbol, args[0])),
        (AttributeRange::Continuous, Some(_)) => Err(err(
            lead,
            format!("continuous attribute `{symbol}` takes no value"),
        )),
        (AttributeRange::Boolean, None) => Ok(Literal::equals(symbol, args[0], TRUE_VALUE)),
        (_, Some(v)) => Ok(Literal::equals(symbol, args[0], v)),
        (AttributeRange::Categorical(_), None) => Err(err(
            lead,
            format!("categorical attribute `{symbol}` needs `=<value>`"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::tests::movie_schema;
    use crate::schema::{AttributeDecl, FALSE_VALUE};

    fn schema() -> Schema {
        let mut s = movie_schema();
        s.add_attribute(AttributeDecl {
            name: "h".into(),
            population: "movie".into(),
            range: AttributeRange::Continuous,
        })
        .unwrap();
        s
    }

    #[test]
    fn parses_each_literal_kind() {
        let s = schema();
        let f = Formula::parse("rated(u,m) * drama(m)=false * age(u)=young * h(m)", &s).unwrap();
        assert_eq!(f.literals().len(), 4);
        assert!(f
            .literals()
            .contains(&Literal::equals("drama", "m", FALSE_VALUE)));
        assert!(f.literals().contains(&Literal::continuous("h", "m")));
        assert_eq!(Formula::parse("True", &s).unwrap(), Formula::truth());
        assert_eq!(
            Formula::parse("drama(m)=true", &s).unwrap(),
            Formula::parse("drama(m)", &s).unwrap()
        );
    }

    #[test]
    fn printer_round_trips() {
        let s = schema();
        for text in [
            "True",
            "rated(u,m) * drama(m)",
            "age(u)=young",
            "rated(u,m) * rated(u',m) * comedy(m)=false * h(m)",
        ] {
            let f = Formula::parse(text, &s).unwrap();
            let again = Formula::parse(&f.to_string(), &s).unwrap();
            assert_eq!(f, again, "{text}");
        }
    }

    #[test]
    fn reports_errors() {
        let s = schema();
        for bad in [
            "",
            "rated(u)",
            "drama(m)=maybe",
            "age(u)",
            "h(m)=1",
            "unknown(u)",
            "rated(u,m) * ",
            "rated(u,m",
            "rated(u,m) foo",
            "rated(u,u)",
        ] {
            assert!(Formula::parse(bad, &s).is_err(), "{bad}");
        }
    }
}
