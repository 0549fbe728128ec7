//! Parser for quadratic Hamiltonians written as `coef:monomial` terms.
//!
//! A monomial is `1`, a coordinate label, or a product of two labels, for
//! example `0.5:q2*q2,0.5:p2*p2,-1:q1,3:1`.

use dirac_core::{DenseMatrix, Error, PhaseFunction, PhaseSpec, Result, Vector};

fn coordinate(spec: &PhaseSpec, label: &str) -> Result<usize> {
    let label = label.trim();
    if let Some(i) = spec.index_of(label) {
        return Ok(i);
    }
    label
        .strip_prefix('z')
        .and_then(|rest| rest.parse::<usize>().ok())
        .filter(|&i| i < spec.dim())
        .ok_or_else(|| Error::InvalidInput(format!("unknown coordinate `{label}`")))
}

pub fn parse(text: &str, spec: &PhaseSpec) -> Result<PhaseFunction> {
    let dim = spec.dim();
    let mut q = DenseMatrix::zeros(dim, dim);
    let mut b = Vector::zeros(dim);
    let mut c = 0.0;
    for term in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (coef, monomial) = term
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("term `{term}` is not of the form coef:monomial")))?;
        let coef: f64 = coef
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("term `{term}`: bad coefficient")))?;
        let factors: Vec<&str> = monomial.split('*').map(str::trim).collect();
        match factors.as_slice() {
            ["1"] => c += coef,
            [x] => b[coordinate(spec, x)?] += coef,
            [x, y] => {
                let (i, j) = (coordinate(spec, x)?, coordinate(spec, y)?);
                if i == j {
                    q[(i, i)] += 2.0 * coef;
                } else {
                    q[(i, j)] += coef;
                    q[(j, i)] += coef;
                }
            }
            _ => return Err(Error::InvalidInput(format!("term `{term}`: degree above 2"))),
        }
    }
    PhaseFunction::quadratic(q, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dirac_core::PhasePoint;

    #[test]
    fn oscillator_values() {
        let spec = PhaseSpec::canonical(2);
        let h = parse("0.5:q2*q2, 0.5:p2*p2", &spec).unwrap();
        let at = PhasePoint::from_slice(&[0.0, 3.0, 0.0, 4.0]);
        assert!((h.eval(&at).unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn mixed_terms() {
        let spec = PhaseSpec::canonical(2);
        let h = parse("2:q1*p2,-1:q2,3:1", &spec).unwrap();
        let at = PhasePoint::from_slice(&[1.5, 2.0, 0.0, -1.0]);
        assert!((h.eval(&at).unwrap() - (-(2.0 * 1.5) - 2.0 + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_cubic_and_unknown() {
        let spec = PhaseSpec::canonical(1);
        assert!(parse("1:q1*q1*q1", &spec).is_err());
        assert!(parse("1:x", &spec).is_err());
        assert!(parse("q1", &spec).is_err());
    }
}
