//! Native instance document.
//!
//! ```text
//! RECVRP-INSTANCE 1
//! name <rest of line>
//! reference_cost <real|->
//! station_copies <int>
//! capacity <real>
//! soc_max <real>
//! soc_min <real>
//! soc_start <real>
//! n_max <int>
//! charge_rate <real>
//! p_e <real>
//! p_t <real>
//! nodes <count>
//! <id> <kind> <x|-> <y|-> <demand> <vehicles> <copy_of|->
//! ...
//! matrix t_mu
//! <row 0, space separated>
//! ...
//! matrix t_sigma | e_mu | e_sigma (same layout)
//! end
//! ```
//!
//! Reals are written in shortest round-trip decimal form, so `load(save(x))`
//! reproduces `x` bit for bit.

use std::fmt::Write as _;

use super::{EdgeMatrices, Instance, Node, NodeId, NodeKind, RobustnessParams, VehicleSpec};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

pub const MAGIC: &str = "RECVRP-INSTANCE";
pub const VERSION: u32 = 1;

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn save(inst: &Instance) -> String {
    let mut out = String::new();
    let v = &inst.vehicle;
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "name {}", inst.name);
    let _ = writeln!(out, "reference_cost {}", opt(inst.reference_cost));
    let _ = writeln!(out, "station_copies {}", inst.station_copies);
    let _ = writeln!(out, "capacity {}", v.capacity);
    let _ = writeln!(out, "soc_max {}", v.soc_max);
    let _ = writeln!(out, "soc_min {}", v.soc_min);
    let _ = writeln!(out, "soc_start {}", v.soc_start);
    let _ = writeln!(out, "n_max {}", v.n_max);
    let _ = writeln!(out, "charge_rate {}", v.charge_rate);
    let _ = writeln!(out, "p_e {}", inst.robustness.p_e);
    let _ = writeln!(out, "p_t {}", inst.robustness.p_t);
    let _ = writeln!(out, "nodes {}", inst.n());
    for n in &inst.nodes {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            n.id,
            n.kind.as_str(),
            opt(n.position.map(|p| p.0)),
            opt(n.position.map(|p| p.1)),
            n.demand,
            n.vehicles_at,
            opt(n.copy_of)
        );
    }
    for (name, m) in inst.edges.all() {
        let _ = writeln!(out, "matrix {name}");
        for i in 0..m.dim() {
            let row: Vec<String> = m.row(i).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l.trim_end()))
            }
            None => Err(Error::parse(self.last + 1, "unexpected end of document")),
        }
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (no, line) = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((no, v)),
            _ => Err(Error::parse(
                no,
                format!("expected `{key} <value>`, got `{line}`"),
            )),
        }
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, v) = self.field(key)?;
        v.parse()
            .map_err(|_| Error::parse(no, format!("invalid value for {key}: `{v}`")))
    }
}

fn parse_tok<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid token `{tok}`")))
}

fn parse_opt<T: std::str::FromStr>(tok: &str, line: usize) -> Result<Option<T>> {
    if tok == "-" {
        Ok(None)
    } else {
        parse_tok(tok, line).map(Some)
    }
}

pub fn load(text: &str) -> Result<Instance> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (no, head) = lines.next_line()?;
    let version = head
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::parse(no, "not a recvrp instance document"))?;
    if version != VERSION.to_string() {
        return Err(Error::parse(
            no,
            format!("unsupported instance format version `{version}` (expected {VERSION})"),
        ));
    }
    let (_, name) = lines.field("name")?;
    let name = name.to_string();
    let (rc_line, rc) = lines.field("reference_cost")?;
    let reference_cost = parse_opt(rc, rc_line)?;
    let station_copies = lines.value("station_copies")?;
    let vehicle = VehicleSpec {
        capacity: lines.value("capacity")?,
        soc_max: lines.value("soc_max")?,
        soc_min: lines.value("soc_min")?,
        soc_start: lines.value("soc_start")?,
        n_max: lines.value("n_max")?,
        charge_rate: lines.value("charge_rate")?,
    };
    let robustness = RobustnessParams {
        p_e: lines.value("p_e")?,
        p_t: lines.value("p_t")?,
    };
    let count: usize = lines.value("nodes")?;
    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, line) = lines.next_line()?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 7 {
            return Err(Error::parse(no, "node line needs 7 fields"));
        }
        let kind = NodeKind::parse(t[1])
            .ok_or_else(|| Error::parse(no, format!("unknown node kind `{}`", t[1])))?;
        let x: Option<f64> = parse_opt(t[2], no)?;
        let y: Option<f64> = parse_opt(t[3], no)?;
        let position = match (x, y) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => {
                return Err(Error::parse(
                    no,
                    "position needs both coordinates or neither",
                ))
            }
        };
        nodes.push(Node {
            id: NodeId(parse_tok(t[0], no)?),
            kind,
            position,
            demand: parse_tok(t[4], no)?,
            vehicles_at: parse_tok(t[5], no)?,
            copy_of: parse_opt::<usize>(t[6], no)?.map(NodeId),
        });
    }
    let mut read_matrix = |key: &str| -> Result<SquareMatrix> {
        let (no, line) = lines.next_line()?;
        if line != format!("matrix {key}") {
            return Err(Error::parse(no, format!("expected `matrix {key}`")));
        }
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, line) = lines.next_line()?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| parse_tok(t, no))
                .collect::<Result<_>>()?;
            if row.len() != count {
                return Err(Error::parse(
                    no,
                    format!("matrix row has {} entries, expected {count}", row.len()),
                ));
            }
            rows.push(row);
        }
        Ok(SquareMatrix::from_rows(rows).expect("rows checked square"))
    };
    let edges = EdgeMatrices {
        t_mu: read_matrix("t_mu")?,
        t_sigma: read_matrix("t_sigma")?,
        e_mu: read_matrix("e_mu")?,
        e_sigma: read_matrix("e_sigma")?,
    };
    let (no, line) = lines.next_line()?;
    if line != "end" {
        return Err(Error::parse(no, "expected `end`"));
    }
    let inst = Instance {
        name,
        nodes,
        edges,
        vehicle,
        robustness,
        station_copies,
        reference_cost,
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_random, GeneratorParams};
    use proptest::prelude::*;

    #[test]
    fn round_trip_and_stable() {
        let inst = generate_random(&GeneratorParams::new(14, vec![1, 2], 8)).unwrap();
        let text = save(&inst);
        let back = load(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(save(&back), text);
    }

    #[test]
    fn version_mismatch() {
        let inst = generate_random(&GeneratorParams::new(8, vec![1], 1)).unwrap();
        let text = save(&inst).replacen("RECVRP-INSTANCE 1", "RECVRP-INSTANCE 2", 1);
        match load(&text) {
            Err(Error::Parse { line: 1, message }) => assert!(message.contains("version")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corrupted_documents_fail() {
        let inst = generate_random(&GeneratorParams::new(8, vec![1], 1)).unwrap();
        let text = save(&inst);
        let truncated = &text[..text.len() / 2];
        assert!(matches!(load(truncated), Err(Error::Parse { .. })));
        let garbled = text.replacen("matrix e_mu", "matrix e_mux", 1);
        assert!(matches!(load(&garbled), Err(Error::Parse { .. })));
        let bad_kind = text.replacen(" customer ", " client ", 1);
        assert!(matches!(load(&bad_kind), Err(Error::Parse { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_instances_round_trip(seed in 0u64..10_000, n in 6usize..16) {
            let inst = generate_random(&GeneratorParams::new(n, vec![1], seed)).unwrap();
            prop_assert_eq!(load(&save(&inst)).unwrap(), inst);
        }
    }
}
