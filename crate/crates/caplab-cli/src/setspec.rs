//! Point-set specs: `"all"`, an index list `"0,4,7"`, or a conjunction of
//! coordinate comparisons like `"coord[0] <= 0.5 && coord[1] > 0"`.

use caplab_core::{Error, FiniteMetricMeasureSpace, PointSet, Result};

pub fn parse_set(space: &FiniteMetricMeasureSpace, spec: &str) -> Result<PointSet> {
    let spec = spec.trim();
    if spec == "all" {
        return Ok(PointSet::new((0..space.len()).collect()));
    }
    if spec.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        let ids = spec
            .split(',')
            .map(|tok| {
                tok.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidParameter(format!("bad point index {tok:?} in set spec"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= space.len()) {
            return Err(Error::InvalidParameter(format!(
                "point {bad} out of range for a {}-point space",
                space.len()
            )));
        }
        return Ok(PointSet::new(ids));
    }
    let atoms = spec.split("&&").map(parse_atom).collect::<Result<Vec<_>>>()?;
    let coords = space.coords().ok_or_else(|| {
        Error::NotApplicable("coordinate predicates need a space with coordinates".into())
    })?;
    let ids = (0..space.len())
        .filter(|&i| atoms.iter().all(|a| a.holds(&coords[i])))
        .collect::<Vec<_>>();
    if ids.is_empty() {
        return Err(Error::InvalidParameter(format!("set spec {spec:?} selects no points")));
    }
    Ok(PointSet::new(ids))
}

/// From a JSON value: an array of indices or a spec string.
pub fn parse_set_value(
    space: &FiniteMetricMeasureSpace,
    value: &serde_json::Value,
) -> Result<PointSet> {
    match value {
        serde_json::Value::String(s) => parse_set(space, s),
        serde_json::Value::Array(items) => {
            let ids = items
                .iter()
                .map(|v| {
                    v.as_u64().map(|i| i as usize).ok_or_else(|| {
                        Error::InvalidParameter(format!("bad point index {v} in E"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(&bad) = ids.iter().find(|&&i| i >= space.len()) {
                return Err(Error::InvalidParameter(format!(
                    "point {bad} out of range for a {}-point space",
                    space.len()
                )));
            }
            Ok(PointSet::new(ids))
        }
        other => Err(Error::InvalidParameter(format!(
            "E must be an index list or a spec string, got {other}"
        ))),
    }
}

struct Atom {
    coord: usize,
    op: Op,
    value: f64,
}

enum Op {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Atom {
    fn holds(&self, point: &[f64]) -> bool {
        let c = point.get(self.coord).copied().unwrap_or(0.0);
        match self.op {
            Op::Le => c <= self.value,
            Op::Lt => c < self.value,
            Op::Ge => c >= self.value,
            Op::Gt => c > self.value,
        }
    }
}

fn parse_atom(text: &str) -> Result<Atom> {
    let text = text.trim();
    let bad = || Error::InvalidParameter(format!("bad predicate atom {text:?}; expected coord[k] <= c"));
    let rest = text.strip_prefix("coord[").ok_or_else(bad)?;
    let (idx, rest) = rest.split_once(']').ok_or_else(bad)?;
    let coord = idx.trim().parse::<usize>().map_err(|_| bad())?;
    let rest = rest.trim_start();
    // two-char operators first so "<=" is not read as "<"
    for (tok, op) in [("<=", Op::Le), (">=", Op::Ge), ("<", Op::Lt), (">", Op::Gt)] {
        if let Some(num) = rest.strip_prefix(tok) {
            let value = num.trim().parse::<f64>().map_err(|_| bad())?;
            return Ok(Atom { coord, op, value });
        }
    }
    Err(bad())
}

#[cfg(test)]
mod tests {
    use super::*;
    use caplab_core::gen::gen_grid;

    #[test]
    fn specs_select_the_expected_points() {
        let s = gen_grid(3, 2).unwrap();
        assert_eq!(parse_set(&s, "all").unwrap().len(), 9);
        assert_eq!(parse_set(&s, "0, 4").unwrap().ids(), &[0, 4]);
        let left = parse_set(&s, "coord[0] <= 0.5").unwrap();
        assert_eq!(left.len(), 6);
        let corner = parse_set(&s, "coord[0] <= 0.0 && coord[1] >= 1.0").unwrap();
        assert_eq!(corner.len(), 1);
        assert!(parse_set(&s, "coord[0] < -9").is_err());
        assert!(parse_set(&s, "99").is_err());
    }
}
