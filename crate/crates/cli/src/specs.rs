//! Parsers for the compound flag values.

use std::path::PathBuf;
use std::str::FromStr;

/// `4,8,16`, `2..5` (inclusive), `2..=5`, or a comma-separated mix.
pub fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: usize = a.trim().parse().map_err(|_| format!("bad range start in {item:?}"))?;
            let hi: usize = b.trim().parse().map_err(|_| format!("bad range end in {item:?}"))?;
            if hi < lo {
                return Err(format!("empty range {item:?}"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(item.parse().map_err(|_| format!("not an integer: {item:?}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// A parsed `--*-list` value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct List(pub Vec<usize>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_list(s).map(List)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    Zero,
    Product(u64),
    Witness,
    File(PathBuf),
}

impl FromStr for StateSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(StateSpec::Zero),
            "witness" => Ok(StateSpec::Witness),
            _ => {
                if let Some(seed) = s.strip_prefix("product:") {
                    seed.parse().map(StateSpec::Product).map_err(|_| format!("bad product seed {seed:?}"))
                } else if let Some(p) = s.strip_prefix("file:") {
                    Ok(StateSpec::File(p.into()))
                } else {
                    Err(format!("unknown state {s:?}; expected zero, product:SEED, witness or file:PATH"))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MomentsSpec {
    ZeroCov,
    WorstCase,
    State(StateSpec),
}

impl FromStr for MomentsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zerocov" => Ok(MomentsSpec::ZeroCov),
            "worstcase" => Ok(MomentsSpec::WorstCase),
            _ => match s.strip_prefix("state:") {
                // a bare path is accepted after `state:`
                Some(rest) => Ok(MomentsSpec::State(rest.parse().unwrap_or_else(|_| StateSpec::File(rest.into())))),
                None => Err(format!("unknown moments {s:?}; expected zerocov, worstcase or state:STATE")),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocSpec {
    L1,
    L2,
    Opt,
    Uniform,
    Inherit,
}

impl AllocSpec {
    pub fn name(self) -> &'static str {
        match self {
            AllocSpec::L1 => "l1",
            AllocSpec::L2 => "l2",
            AllocSpec::Opt => "opt",
            AllocSpec::Uniform => "uniform",
            AllocSpec::Inherit => "inherit",
        }
    }
}

impl FromStr for AllocSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "l1" => AllocSpec::L1,
            "l2" => AllocSpec::L2,
            "opt" => AllocSpec::Opt,
            "uniform" => AllocSpec::Uniform,
            "inherit" => AllocSpec::Inherit,
            _ => return Err(format!("unknown allocation {s:?}; expected l1, l2, opt, uniform or inherit")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightsSpec {
    Heuristic,
    Optimal,
}

impl FromStr for WeightsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heuristic" => Ok(WeightsSpec::Heuristic),
            "optimal" => Ok(WeightsSpec::Optimal),
            _ => Err(format!("unknown weights {s:?}; expected heuristic or optimal")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("4,8,16,32").unwrap(), vec![4, 8, 16, 32]);
        assert_eq!(parse_list("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_list("1,3..=4, 9").unwrap(), vec![1, 3, 4, 9]);
        assert!(parse_list("5..2").is_err());
        assert!(parse_list("").is_err());
        assert!(parse_list("a").is_err());
    }

    #[test]
    fn states_and_moments() {
        assert_eq!("product:7".parse::<StateSpec>().unwrap(), StateSpec::Product(7));
        assert_eq!("file:x.json".parse::<StateSpec>().unwrap(), StateSpec::File("x.json".into()));
        assert!("bogus".parse::<StateSpec>().is_err());
        assert_eq!("state:witness".parse::<MomentsSpec>().unwrap(), MomentsSpec::State(StateSpec::Witness));
        assert_eq!("state:s.json".parse::<MomentsSpec>().unwrap(), MomentsSpec::State(StateSpec::File("s.json".into())));
        assert!("nope".parse::<MomentsSpec>().is_err());
    }
}
