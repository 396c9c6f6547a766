//! Text format for boosted ensembles.
//!
//! ```text
//! DPRT-GBT 1
//! config <json>
//! base_score <f64>
//! features <n>
//! trees <k>
//! tree <node count>
//! S <feature> <threshold>    (preorder; left subtree follows, then right)
//! L <weight>
//! ```

use std::io::{BufRead, Write};

use super::{BoostConfig, Ensemble, Node, RegTree};
use crate::util::parse_f64;
use crate::{Error, Result};

const MAGIC: &str = "DPRT-GBT 1";
const WHAT: &str = "boosted ensemble";

pub fn write_ensemble<W: Write>(mut out: W, model: &Ensemble) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "config {}", serde_json::to_string(&model.config)?)?;
    writeln!(out, "base_score {:?}", model.base_score)?;
    writeln!(out, "features {}", model.num_features)?;
    writeln!(out, "trees {}", model.trees.len())?;
    for tree in &model.trees {
        writeln!(out, "tree {}", tree.nodes().len())?;
        write_preorder(&mut out, tree.nodes(), 0)?;
    }
    Ok(())
}

fn write_preorder<W: Write>(out: &mut W, nodes: &[Node], i: usize) -> Result<()> {
    match nodes[i] {
        Node::Leaf { weight } => writeln!(out, "L {weight:?}")?,
        Node::Split { feature, threshold, left, right } => {
            writeln!(out, "S {feature} {threshold:?}")?;
            write_preorder(out, nodes, left)?;
            write_preorder(out, nodes, right)?;
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(Error::format(WHAT, self.line, "unexpected end of file")),
        }
    }

    fn field<'a>(&self, text: &'a str, key: &str) -> Result<&'a str> {
        text.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::format(WHAT, self.line, format!("expected `{key}`")))
    }

    fn count(&self, text: &str, key: &str) -> Result<usize> {
        self.field(text, key)?.trim().parse().map_err(|_| Error::format(WHAT, self.line, format!("bad `{key}` count")))
    }
}

/// Reads a preorder subtree, returning its root index.
fn read_subtree<R: BufRead>(lines: &mut Lines<R>, nodes: &mut Vec<Node>, budget: usize) -> Result<usize> {
    if nodes.len() >= budget {
        return Err(Error::format(WHAT, lines.line, "more nodes than declared"));
    }
    let text = lines.next()?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let id = nodes.len();
    match tokens.as_slice() {
        ["L", w] => {
            nodes.push(Node::Leaf { weight: parse_f64(w, WHAT, lines.line)? });
        }
        ["S", f, t] => {
            let feature = f.parse().map_err(|_| Error::format(WHAT, lines.line, "bad feature index"))?;
            let threshold = parse_f64(t, WHAT, lines.line)?;
            nodes.push(Node::Leaf { weight: 0.0 });
            let left = read_subtree(lines, nodes, budget)?;
            let right = read_subtree(lines, nodes, budget)?;
            nodes[id] = Node::Split { feature, threshold, left, right };
        }
        _ => return Err(Error::format(WHAT, lines.line, format!("bad node `{text}`"))),
    }
    Ok(id)
}

pub fn read_ensemble<R: BufRead>(input: R) -> Result<Ensemble> {
    let mut lines = Lines { inner: input.lines(), line: 0 };
    if lines.next()?.trim_end() != MAGIC {
        return Err(Error::format(WHAT, 1, format!("expected `{MAGIC}` header")));
    }
    let text = lines.next()?;
    let config: BoostConfig = serde_json::from_str(lines.field(&text, "config")?)
        .map_err(|e| Error::format(WHAT, lines.line, e.to_string()))?;
    let text = lines.next()?;
    let base_score = parse_f64(lines.field(&text, "base_score")?.trim(), WHAT, lines.line)?;
    let text = lines.next()?;
    let num_features = lines.count(&text, "features")?;
    let text = lines.next()?;
    let n_trees = lines.count(&text, "trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let text = lines.next()?;
        let n_nodes = lines.count(&text, "tree")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        read_subtree(&mut lines, &mut nodes, n_nodes)?;
        if nodes.len() != n_nodes {
            return Err(Error::format(
                WHAT,
                lines.line,
                format!("tree declared {n_nodes} nodes, read {}", nodes.len()),
            ));
        }
        if nodes.iter().any(|n| matches!(n, Node::Split { feature, .. } if *feature >= num_features)) {
            return Err(Error::format(WHAT, lines.line, "split feature out of range"));
        }
        trees.push(RegTree::from_nodes(nodes).map_err(|e| Error::format(WHAT, lines.line, e.to_string()))?);
    }
    Ok(Ensemble { base_score, trees, objective: config.objective, num_features, config })
}
