//! Text format for combiner parameters.
//!
//! ```text
//! DPRT-NN 1 <kind> d=<input dim> [h=<hidden>] [seed=<seed>]
//! <tensor values, one tensor per line>
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{AttentionModel, AverageModel, CombinerKind, CombinerParams, DanParams, LstmModel, Network, RandomModel};
use crate::util::parse_f64;
use crate::{Error, Result};

const MAGIC: &str = "DPRT-NN";
const WHAT: &str = "combiner parameters";

fn write_tensors<W: Write, N: Network>(out: &mut W, net: &N) -> Result<()> {
    for t in net.tensors() {
        let line: Vec<String> = t.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_params<W: Write>(mut out: W, params: &CombinerParams) -> Result<()> {
    let kind = params.kind();
    let d = params.input_dim();
    match params {
        CombinerParams::Random(net) => {
            writeln!(out, "{MAGIC} 1 {kind} d={d} seed={}", net.seed)?;
            write_tensors(&mut out, net)?;
        }
        CombinerParams::Average(net) => {
            writeln!(out, "{MAGIC} 1 {kind} d={d}")?;
            write_tensors(&mut out, net)?;
        }
        CombinerParams::Dan(net) => {
            writeln!(out, "{MAGIC} 1 {kind} d={d}")?;
            write_tensors(&mut out, net)?;
        }
        CombinerParams::Lstm(net) => {
            writeln!(out, "{MAGIC} 1 {kind} d={d} h={}", net.output_dim())?;
            write_tensors(&mut out, net)?;
        }
        CombinerParams::LstmAttention(net) => {
            writeln!(out, "{MAGIC} 1 {kind} d={d} h={}", net.output_dim())?;
            write_tensors(&mut out, net)?;
        }
    }
    Ok(())
}

fn read_tensors<R: BufRead, N: Network>(lines: &mut std::iter::Enumerate<std::io::Lines<R>>, mut net: N) -> Result<N> {
    for t in net.tensors_mut() {
        let (i, line) = lines.next().ok_or_else(|| Error::format(WHAT, 0, "missing tensor line"))?;
        let line = line?;
        let values: Vec<f64> = line.split_whitespace().map(|tok| parse_f64(tok, WHAT, i + 1)).collect::<Result<_>>()?;
        if values.len() != t.len() {
            return Err(Error::format(WHAT, i + 1, format!("expected {} values, found {}", t.len(), values.len())));
        }
        t.copy_from_slice(&values);
    }
    if let Some((i, line)) = lines.next() {
        if !line?.trim().is_empty() {
            return Err(Error::format(WHAT, i + 1, "trailing data"));
        }
    }
    Ok(net)
}

pub fn read_params<R: BufRead>(input: R) -> Result<CombinerParams> {
    let mut lines = input.lines().enumerate();
    let header = lines.next().ok_or_else(|| Error::format(WHAT, 1, "empty input"))?.1?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(MAGIC) || tokens.next() != Some("1") {
        return Err(Error::format(WHAT, 1, format!("expected `{MAGIC} 1` header")));
    }
    let kind: CombinerKind = tokens
        .next()
        .ok_or_else(|| Error::format(WHAT, 1, "missing combiner kind"))?
        .parse()
        .map_err(|e: Error| Error::format(WHAT, 1, e.to_string()))?;
    let mut fields = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::format(WHAT, 1, format!("bad field `{tok}`")))?;
        let v: u64 = v.parse().map_err(|_| Error::format(WHAT, 1, format!("bad value in `{tok}`")))?;
        fields.insert(k.to_string(), v);
    }
    let field = |name: &str| -> Result<usize> {
        match fields.get(name) {
            Some(&v) if v > 0 => Ok(v as usize),
            _ => Err(Error::format(WHAT, 1, format!("missing or zero `{name}=`"))),
        }
    };
    let d = field("d")?;
    let params = match kind {
        CombinerKind::Random => {
            let seed = *fields.get("seed").ok_or_else(|| Error::format(WHAT, 1, "missing `seed=`"))?;
            CombinerParams::Random(read_tensors(&mut lines, RandomModel::zeros(d, seed))?)
        }
        CombinerKind::Average => CombinerParams::Average(read_tensors(&mut lines, AverageModel::zeros(d))?),
        CombinerKind::Dan => CombinerParams::Dan(read_tensors(&mut lines, DanParams::zeros(d))?),
        CombinerKind::Lstm => {
            let h = field("h")?;
            CombinerParams::Lstm(read_tensors(&mut lines, LstmModel::zeros(d, h))?)
        }
        CombinerKind::LstmAttention => {
            let h = field("h")?;
            CombinerParams::LstmAttention(read_tensors(&mut lines, AttentionModel::zeros(d, h))?)
        }
    };
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combiner::Readout;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(p: &CombinerParams) -> CombinerParams {
        let mut buf = Vec::new();
        write_params(&mut buf, p).unwrap();
        read_params(buf.as_slice()).unwrap()
    }

    #[test]
    fn every_kind_round_trips_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let all = [
            CombinerParams::Random(RandomModel { seed: 77, readout: Readout::init(3, &mut rng) }),
            CombinerParams::Average(AverageModel { readout: Readout::init(5, &mut rng) }),
            CombinerParams::Dan(DanParams::init(5, &mut rng)),
            CombinerParams::Lstm(LstmModel::init(3, 2, &mut rng)),
            CombinerParams::LstmAttention(AttentionModel::init(3, 4, &mut rng)),
        ];
        for p in &all {
            assert_eq!(&round_trip(p), p);
        }
    }

    #[test]
    fn rejects_malformed_files() {
        for bad in [
            "",
            "DPRT-NN 2 dan d=2\n",
            "DPRT-NN 1 mlp d=2\n",
            "DPRT-NN 1 lstm d=2\n",
            "DPRT-NN 1 dan d=1\n1 2\n",
            "DPRT-NN 1 random d=2\n",
        ] {
            assert!(read_params(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }
}
