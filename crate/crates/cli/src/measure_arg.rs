//! Measure grammar:
//! `lebesgue | delta[:loc] | exp_decay:a | exp_growth:a,p |
//!  gaussian_bump:c,w | indicator:l,r | atoms:(loc,mass);(loc,mass);... |
//!  delta_prime[:loc]`
//!
//! `delta_prime` (the derivative of a point mass) is not a measure; it is
//! accepted only by the Picard divergence demonstration and rejected
//! anywhere a genuine measure is required.

use sheq_core::measure::{Atom, InitialMeasure};
use sheq_core::picard::PicardInput;

use crate::CliError;

/// A parsed measure argument: either a genuine measure or the distribution
/// admitted for the divergence demo.
#[derive(Debug, Clone)]
pub enum MeasureArg {
    Measure(InitialMeasure),
    DeltaDerivative { location: f64, order: u32 },
}

impl MeasureArg {
    pub fn require_measure(self) -> Result<InitialMeasure, CliError> {
        match self {
            Self::Measure(m) => Ok(m),
            Self::DeltaDerivative { .. } => Err(CliError::config(
                "delta_prime is not a measure; it is only accepted by the Picard divergence demo",
            )),
        }
    }

    pub fn into_picard_input(self) -> PicardInput {
        match self {
            Self::Measure(m) => PicardInput::Measure(m),
            Self::DeltaDerivative { location, order } => PicardInput::DeltaDerivative { location, order },
        }
    }
}

fn parse_f64(part: &str, what: &str) -> Result<f64, CliError> {
    part.trim()
        .parse()
        .map_err(|_| CliError::config(format!("measure: '{part}' is not a valid {what}")))
}

/// Parse the measure grammar.
pub fn parse_measure(spec: &str) -> Result<MeasureArg, CliError> {
    let spec = spec.trim();
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec, None),
    };
    let measure = match (name, args) {
        ("lebesgue", None) => InitialMeasure::lebesgue(),
        ("delta", None) => InitialMeasure::dirac(),
        ("delta", Some(a)) => InitialMeasure::dirac_at(parse_f64(a, "location")?, 1.0),
        ("delta_prime", None) => return Ok(MeasureArg::DeltaDerivative { location: 0.0, order: 1 }),
        ("delta_prime", Some(a)) => {
            return Ok(MeasureArg::DeltaDerivative { location: parse_f64(a, "location")?, order: 1 })
        }
        ("exp_decay", Some(a)) => {
            InitialMeasure::exp_decay(parse_f64(a, "decay rate")?).map_err(|e| CliError::config(e.to_string()))?
        }
        ("exp_growth", Some(a)) => {
            let (rate, power) = a
                .split_once(',')
                .ok_or_else(|| CliError::config("exp_growth needs 'rate,power'"))?;
            InitialMeasure::exp_growth(parse_f64(rate, "growth rate")?, parse_f64(power, "growth power")?)
                .map_err(|e| CliError::config(e.to_string()))?
        }
        ("gaussian_bump", Some(a)) => {
            let (c, w) =
                a.split_once(',').ok_or_else(|| CliError::config("gaussian_bump needs 'center,width'"))?;
            InitialMeasure::gaussian_bump(parse_f64(c, "center")?, parse_f64(w, "width")?)
                .map_err(|e| CliError::config(e.to_string()))?
        }
        ("indicator", Some(a)) => {
            let (l, r) = a.split_once(',').ok_or_else(|| CliError::config("indicator needs 'lo,hi'"))?;
            InitialMeasure::indicator(parse_f64(l, "left endpoint")?, parse_f64(r, "right endpoint")?)
                .map_err(|e| CliError::config(e.to_string()))?
        }
        ("atoms", Some(a)) => {
            let mut atoms = Vec::new();
            for chunk in a.split(';') {
                let chunk = chunk.trim();
                let inner = chunk
                    .strip_prefix('(')
                    .and_then(|c| c.strip_suffix(')'))
                    .ok_or_else(|| CliError::config(format!("atoms: expected '(loc,mass)', got '{chunk}'")))?;
                let (loc, mass) = inner
                    .split_once(',')
                    .ok_or_else(|| CliError::config(format!("atoms: expected '(loc,mass)', got '{chunk}'")))?;
                atoms.push(Atom { location: parse_f64(loc, "location")?, mass: parse_f64(mass, "mass")? });
            }
            if atoms.is_empty() {
                return Err(CliError::config("atoms: need at least one (loc,mass) pair"));
            }
            InitialMeasure::from_atoms(atoms)
        }
        _ => {
            return Err(CliError::config(format!(
                "unknown measure '{spec}'; expected lebesgue | delta[:loc] | delta_prime[:loc] | \
                 exp_decay:a | exp_growth:a,p | gaussian_bump:c,w | indicator:l,r | atoms:(loc,mass);..."
            )))
        }
    };
    Ok(MeasureArg::Measure(measure))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_catalog() {
        assert!(matches!(parse_measure("lebesgue").unwrap(), MeasureArg::Measure(_)));
        assert!(matches!(parse_measure("delta"), Ok(MeasureArg::Measure(_))));
        assert!(matches!(parse_measure("delta:1.5"), Ok(MeasureArg::Measure(_))));
        assert!(matches!(parse_measure("exp_decay:0.25"), Ok(MeasureArg::Measure(_))));
        assert!(matches!(parse_measure("exp_growth:1,1.5"), Ok(MeasureArg::Measure(_))));
        assert!(matches!(parse_measure("gaussian_bump:0,0.5"), Ok(MeasureArg::Measure(_))));
        assert!(matches!(parse_measure("indicator:-1,1"), Ok(MeasureArg::Measure(_))));
        let atoms = parse_measure("atoms:(0,1);(1.5,-0.5)").unwrap();
        match atoms {
            MeasureArg::Measure(m) => assert_eq!(m.atoms().len(), 2),
            _ => panic!(),
        }
        assert!(matches!(
            parse_measure("delta_prime"),
            Ok(MeasureArg::DeltaDerivative { order: 1, .. })
        ));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(parse_measure("nonsense").is_err());
        assert!(parse_measure("exp_decay:-1").is_err());
        assert!(parse_measure("exp_growth:1").is_err());
        assert!(parse_measure("atoms:(0 1)").is_err());
        assert!(parse_measure("delta_prime").unwrap().require_measure().is_err());
    }
}
