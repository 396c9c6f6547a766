//! Embedding files: a header `DPRT-EMB 1 <count> <dim>` (or `DPRT-DST 1 ...` for
//! destinations) followed by one `id v1 ... vd` line per vector. Values are
//! written in shortest round-trip form.

use std::io::{BufRead, Write};

use super::skipgram::EmbeddingTable;
use crate::util::parse_f64;
use crate::{Error, Result};

const LISTING_MAGIC: &str = "DPRT-EMB";
const DESTINATION_MAGIC: &str = "DPRT-DST";
const VERSION: &str = "1";

fn write_table<W: Write>(mut w: W, magic: &str, table: &EmbeddingTable) -> Result<()> {
    writeln!(w, "{magic} {VERSION} {} {}", table.len(), table.dim())?;
    for (id, v) in table.iter() {
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::InvalidInput(format!("id `{id}` cannot be written")));
        }
        write!(w, "{id}")?;
        for x in v {
            write!(w, " {x:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn read_table<R: BufRead>(r: R, magic: &str, what: &'static str) -> Result<EmbeddingTable> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::format(what, 1, "missing header"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != magic || fields[1] != VERSION {
        return Err(Error::format(what, 1, format!("expected `{magic} {VERSION} <n> <d>`, got `{header}`")));
    }
    let count: usize = fields[2].parse().map_err(|_| Error::format(what, 1, "bad count"))?;
    let dim: usize = fields[3].parse().map_err(|_| Error::format(what, 1, "bad dimension"))?;
    let mut table = EmbeddingTable::new(dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let id = tokens.next().expect("non-empty line").to_string();
        let values = tokens.map(|t| parse_f64(t, what, lineno)).collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::format(what, lineno, format!("{} values, expected {dim}", values.len())));
        }
        if table.contains(&id) {
            return Err(Error::format(what, lineno, format!("duplicate id `{id}`")));
        }
        table.insert(id, values)?;
    }
    if table.len() != count {
        return Err(Error::format(what, 1, format!("header promises {count} rows, found {}", table.len())));
    }
    Ok(table)
}

pub fn write_embeddings<W: Write>(w: W, table: &EmbeddingTable) -> Result<()> {
    write_table(w, LISTING_MAGIC, table)
}

pub fn read_embeddings<R: BufRead>(r: R) -> Result<EmbeddingTable> {
    read_table(r, LISTING_MAGIC, "embedding file")
}

pub fn write_destinations<W: Write>(w: W, table: &EmbeddingTable) -> Result<()> {
    write_table(w, DESTINATION_MAGIC, table)
}

pub fn read_destinations<R: BufRead>(r: R) -> Result<EmbeddingTable> {
    read_table(r, DESTINATION_MAGIC, "destination file")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a".into(), vec![0.5, -1.0]).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "DPRT-EMB 1 1 2\na 0.5 -1.0\n");
    }

    #[test]
    fn rejects_wrong_magic_and_width() {
        assert!(read_embeddings("DPRT-DST 1 0 2\n".as_bytes()).is_err());
        assert!(read_embeddings("DPRT-EMB 1 1 2\na 1.0\n".as_bytes()).is_err());
        assert!(read_embeddings("DPRT-EMB 1 2 1\na 1.0\n".as_bytes()).is_err());
        assert!(read_destinations("DPRT-DST 1 1 1\nx 2.5\n".as_bytes()).is_ok());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let mut t = EmbeddingTable::new(3);
            for (i, r) in rows.iter().enumerate() {
                t.insert(format!("l{i}"), r.clone()).unwrap();
            }
            let mut buf = Vec::new();
            write_destinations(&mut buf, &t).unwrap();
            let back = read_destinations(buf.as_slice()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
