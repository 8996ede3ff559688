//! Line-oriented text format for reaction networks.
//!
//! ```text
//! # comment
//! species X_OFF = 1
//! species X_ON
//! reaction X_OFF -> X_ON @ 5 [gate=ST-ES] [catalysts=Y,W]
//! reaction X_ON + X_OFF -> 0 @ 5e4
//! pool X = X_ON, X_OFF
//! schedule ST-ES = 0:0.5, 15:15.5
//! ```
//!
//! Species mentioned only in reactions start at count 0. Pool totals are
//! taken from the initial counts at the point the pool line is read.

use std::fmt::Write as _;

use crate::crn::{CrnError, ReactionNetwork, Signal, SignalSchedule};

fn err(line: usize, message: impl Into<String>) -> CrnError {
    CrnError::Parse { line, message: message.into() }
}

fn at_line(line: usize) -> impl Fn(CrnError) -> CrnError {
    move |e| match e {
        CrnError::Parse { line: 0, message } => CrnError::Parse { line, message },
        other => other,
    }
}

pub fn parse_network(text: &str) -> Result<ReactionNetwork, CrnError> {
    let mut net = ReactionNetwork::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();
        match keyword {
            "species" => {
                let (name, count) = match rest.split_once('=') {
                    Some((n, c)) => {
                        let c = c.trim().parse::<u64>().map_err(|_| err(line, format!("bad count `{}`", c.trim())))?;
                        (n.trim(), c)
                    }
                    None => (rest, 0),
                };
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(err(line, format!("bad species name `{name}`")));
                }
                net.add_species(name, count).map_err(at_line(line))?;
            }
            "reaction" => parse_reaction(&mut net, rest, line)?,
            "pool" => {
                let (name, members) = rest.split_once('=').ok_or_else(|| err(line, "pool needs `name = members`"))?;
                let members: Vec<&str> = members.split(',').map(str::trim).filter(|m| !m.is_empty()).collect();
                net.declare_pool(name.trim(), &members).map_err(at_line(line))?;
            }
            "schedule" => {
                let (signal, spans) = rest.split_once('=').ok_or_else(|| err(line, "schedule needs `signal = spans`"))?;
                let signal: Signal = signal.trim().parse()?;
                let mut intervals = Vec::new();
                for span in spans.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (a, b) = span.split_once(':').ok_or_else(|| err(line, format!("bad span `{span}`")))?;
                    let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| err(line, format!("bad time `{}`", v.trim())));
                    intervals.push((parse(a)?, parse(b)?));
                }
                net.set_schedule(SignalSchedule::new(signal, intervals)?);
            }
            other => return Err(err(line, format!("unknown keyword `{other}`"))),
        }
    }
    net.verify_pools_structurally()?;
    Ok(net)
}

fn parse_reaction(net: &mut ReactionNetwork, rest: &str, line: usize) -> Result<(), CrnError> {
    let (equation, tail) = rest.split_once('@').ok_or_else(|| err(line, "reaction needs `@ rate`"))?;
    let tail = tail.trim();
    let (rate, mut options) = match tail.find('[') {
        Some(p) => (&tail[..p], &tail[p..]),
        None => (tail, ""),
    };
    let rate: f64 = rate.trim().parse().map_err(|_| err(line, format!("bad rate `{}`", rate.trim())))?;
    let mut gate = None;
    let mut catalysts: Vec<String> = Vec::new();
    while let Some(start) = options.find('[') {
        let end = options[start..].find(']').ok_or_else(|| err(line, "unclosed `[`"))? + start;
        let opt = &options[start + 1..end];
        let (key, value) = opt.split_once('=').ok_or_else(|| err(line, format!("bad option `{opt}`")))?;
        match key.trim() {
            "gate" => gate = Some(value.trim().parse::<Signal>()?),
            "catalysts" => catalysts.extend(value.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty())),
            other => return Err(err(line, format!("unknown option `{other}`"))),
        }
        options = &options[end + 1..];
    }
    if !options.trim().is_empty() {
        return Err(err(line, format!("trailing text `{}`", options.trim())));
    }
    let cats: Vec<&str> = catalysts.iter().map(String::as_str).collect();
    net.add(equation.trim(), rate, gate, &cats).map_err(at_line(line))?;
    Ok(())
}

/// Serializes a network. Catalysts appear on both sides of each reaction.
pub fn write_network(net: &ReactionNetwork) -> String {
    let mut out = String::new();
    for s in net.species() {
        let _ = writeln!(out, "species {} = {}", s.name, s.initial_count);
    }
    let side = |terms: &[(crate::SpeciesId, u32)]| {
        if terms.is_empty() {
            return "0".to_string();
        }
        terms
            .iter()
            .map(|&(s, n)| if n == 1 { net.species_name(s).to_string() } else { format!("{n} {}", net.species_name(s)) })
            .collect::<Vec<_>>()
            .join(" + ")
    };
    for r in net.reactions() {
        let _ = write!(out, "reaction {} -> {} @ {:?}", side(r.reactants()), side(r.products()), r.rate());
        if let Some(g) = r.gate() {
            let _ = write!(out, " [gate={g}]");
        }
        out.push('\n');
    }
    for p in net.pools() {
        let members: Vec<&str> = p.members.iter().map(|&s| net.species_name(s)).collect();
        let _ = writeln!(out, "pool {} = {}", p.name, members.join(", "));
    }
    for s in net.schedules() {
        let spans: Vec<String> = s.intervals().iter().map(|(a, b)| format!("{a:?}:{b:?}")).collect();
        let _ = writeln!(out, "schedule {} = {}", s.signal(), spans.join(", "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two-state toggle
species X_OFF = 1
species X_ON
reaction X_OFF -> X_ON @ 5 [catalysts=Y]
reaction X_ON -> X_OFF @ 2.5 [gate=ST-ES] [catalysts=W]
reaction 2 Z -> 0 @ 1e-3
pool X = X_ON, X_OFF
schedule ST-ES = 0:0.5, 15:15.5
";

    #[test]
    fn parses_sample() {
        let net = parse_network(SAMPLE).unwrap();
        assert_eq!(net.reactions().len(), 3);
        assert_eq!(net.initial_counts()[net.species_id("X_OFF").unwrap().0], 1);
        assert_eq!(net.reactions()[1].gate(), Some(Signal::SymbolStart));
        assert!(net.is_signal_on(Signal::SymbolStart, 15.2));
        assert_eq!(net.pools()[0].total, 1);
    }

    #[test]
    fn round_trip_preserves_dynamics() {
        let net = parse_network(SAMPLE).unwrap();
        let back = parse_network(&write_network(&net)).unwrap();
        assert_eq!(back.species(), net.species());
        assert_eq!(back.schedules(), net.schedules());
        for (a, b) in net.reactions().iter().zip(back.reactions()) {
            assert_eq!(a.reactants(), b.reactants());
            assert_eq!(a.delta(), b.delta());
            assert_eq!(a.rate(), b.rate());
            assert_eq!(a.gate(), b.gate());
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_network("species A\nreaction A -> B 3\n").unwrap_err();
        assert_eq!(e, CrnError::Parse { line: 2, message: "reaction needs `@ rate`".into() });
        assert!(matches!(parse_network("reaction A -> B @ 1 [gate=XX-ES]"), Err(CrnError::UnknownSignal(_))));
        assert!(matches!(parse_network("frobnicate"), Err(CrnError::Parse { line: 1, .. })));
        assert!(matches!(parse_network("reaction A -> B @ -1"), Err(CrnError::InvalidRate { .. })));
    }

    #[test]
    fn pool_not_conserved_is_rejected() {
        let text = "species A = 1\nspecies B\nreaction A -> 0 @ 1\npool P = A, B\n";
        assert!(matches!(parse_network(text), Err(CrnError::PoolNotConserved { .. })));
    }
}
