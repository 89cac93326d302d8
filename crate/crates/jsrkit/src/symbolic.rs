//! Finite words over {1..l}, periodic orbits and de Bruijn-style word graphs.

use std::collections::HashMap;
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WORD_CAP: u128 = 1 << 24;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    alphabet: usize,
    symbols: Vec<u16>,
}

impl Word {
    pub fn new(alphabet: usize, symbols: Vec<u16>) -> Result<Self> {
        if alphabet == 0 || alphabet > u16::MAX as usize {
            return Err(Error::Domain(format!(
                "alphabet size {alphabet} not supported"
            )));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s == 0 || s as usize > alphabet) {
            return Err(Error::IndexOutOfRange {
                symbol: s as usize,
                alphabet,
            });
        }
        Ok(Self { alphabet, symbols })
    }

    pub fn empty(alphabet: usize) -> Self {
        Self {
            alphabet,
            symbols: Vec::new(),
        }
    }

    /// Parse "1212" (single digits) or "1,2,10" (comma separated).
    pub fn parse(alphabet: usize, text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::Domain(format!("cannot parse word {text:?}"));
        let syms = if t.contains(',') {
            t.split(',')
                .map(|p| p.trim().parse::<u16>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?
        } else {
            t.chars()
                .map(|c| c.to_digit(10).map(|d| d as u16).ok_or_else(bad))
                .collect::<Result<Vec<_>>>()?
        };
        Self::new(alphabet, syms)
    }

    pub fn constant(alphabet: usize, symbol: u16, n: usize) -> Result<Self> {
        Self::new(alphabet, vec![symbol; n])
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// sigma: drop the first symbol.
    pub fn shift(&self) -> Result<Word> {
        if self.symbols.is_empty() {
            return Err(Error::Domain("cannot shift the empty word".into()));
        }
        Ok(Self {
            alphabet: self.alphabet,
            symbols: self.symbols[1..].to_vec(),
        })
    }

    pub fn prefix(&self, n: usize) -> Word {
        Self {
            alphabet: self.alphabet,
            symbols: self.symbols[..n].to_vec(),
        }
    }

    /// Drop the first `n` symbols.
    pub fn skip(&self, n: usize) -> Word {
        Self {
            alphabet: self.alphabet,
            symbols: self.symbols[n..].to_vec(),
        }
    }

    pub fn window(&self, start: usize, len: usize) -> Word {
        Self {
            alphabet: self.alphabet,
            symbols: self.symbols[start..start + len].to_vec(),
        }
    }

    pub fn pushed(&self, s: u16) -> Word {
        let mut symbols = Vec::with_capacity(self.symbols.len() + 1);
        symbols.extend_from_slice(&self.symbols);
        symbols.push(s);
        Self {
            alphabet: self.alphabet,
            symbols,
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        Self {
            alphabet: self.alphabet,
            symbols,
        }
    }

    pub fn repeat(&self, k: usize) -> Word {
        Self {
            alphabet: self.alphabet,
            symbols: self.symbols.repeat(k),
        }
    }

    /// Periodic extension truncated to length `n`.
    pub fn cycle_to(&self, n: usize) -> Word {
        let symbols = self.symbols.iter().copied().cycle().take(n).collect();
        Self {
            alphabet: self.alphabet,
            symbols,
        }
    }

    pub fn count(&self, symbol: u16) -> usize {
        self.symbols.iter().filter(|&&s| s == symbol).count()
    }

    pub fn frequency(&self, symbol: u16) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.count(symbol) as f64 / self.len() as f64
    }

    pub fn rotations(&self) -> impl Iterator<Item = Word> + '_ {
        let n = self.len();
        (0..n.max(1)).map(move |r| {
            let symbols = (0..n).map(|k| self.symbols[(r + k) % n]).collect();
            Word {
                alphabet: self.alphabet,
                symbols,
            }
        })
    }

    /// Is `self` a factor of the bi-infinite periodic extension of `period`?
    pub fn is_cyclic_factor_of(&self, period: &Word) -> bool {
        let p = period.len();
        if p == 0 {
            return self.is_empty();
        }
        (0..p).any(|r| {
            self.symbols
                .iter()
                .enumerate()
                .all(|(k, &s)| period.symbols[(r + k) % p] == s)
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.alphabet <= 9 {
            for s in &self.symbols {
                write!(f, "{s}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.symbols.iter().map(u16::to_string).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

/// 2^{-k} where k is the first (1-based) index at which the words differ;
/// 0 when they agree on their whole length.
pub fn cylinder_metric(x: &Word, y: &Word) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(x.symbols
        .iter()
        .zip(&y.symbols)
        .position(|(a, b)| a != b)
        .map_or(0.0, |k| 0.5f64.powi(k as i32 + 1)))
}

pub fn word_count(alphabet: usize, n: usize) -> u128 {
    (alphabet as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX)
}

/// All words of length `n` in lexicographic order.
pub fn enumerate_words(alphabet: usize, n: usize, cap: u128) -> Result<WordIter> {
    let total = word_count(alphabet, n);
    if total > cap {
        return Err(Error::Resource {
            requested: total,
            cap,
        });
    }
    Ok(WordIter::range(alphabet, n, 0, total as u64))
}

/// Iterator over the lexicographic ranks `[start, end)` of length-`n` words,
/// so enumeration can be split into deterministic chunks.
#[derive(Clone, Debug)]
pub struct WordIter {
    alphabet: usize,
    current: Vec<u16>,
    remaining: u64,
}

impl WordIter {
    pub fn range(alphabet: usize, n: usize, start: u64, end: u64) -> Self {
        let mut current = vec![1u16; n];
        let mut r = start;
        for slot in current.iter_mut().rev() {
            *slot = (r % alphabet as u64) as u16 + 1;
            r /= alphabet as u64;
        }
        Self {
            alphabet,
            current,
            remaining: end.saturating_sub(start),
        }
    }
}

impl Iterator for WordIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = Word {
            alphabet: self.alphabet,
            symbols: self.current.clone(),
        };
        for slot in self.current.iter_mut().rev() {
            if (*slot as usize) < self.alphabet {
                *slot += 1;
                break;
            }
            *slot = 1;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.remaining as usize;
        (r, Some(r))
    }
}

/// Lyndon words (primitive, strictly least among rotations) of length 1..=max_len,
/// ordered by length and then lexicographically. These are exactly the
/// normal forms of primitive periodic orbits.
pub fn lyndon_words(alphabet: usize, max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    if max_len == 0 {
        return out;
    }
    // Duval's generation, 0-based symbols
    let k = alphabet as u16;
    let mut w: Vec<u16> = vec![0];
    loop {
        out.push(Word {
            alphabet,
            symbols: w.iter().map(|s| s + 1).collect(),
        });
        let m = w.len();
        while w.len() < max_len {
            let s = w[w.len() - m];
            w.push(s);
        }
        while let Some(&last) = w.last() {
            if last + 1 == k {
                w.pop();
            } else {
                break;
            }
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    out.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.symbols.cmp(&b.symbols))
    });
    out
}

/// Periodic point represented by its primitive root in least-rotation form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    word: Word,
}

impl PeriodicOrbit {
    pub fn new(word: &Word) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Domain(
                "a periodic orbit needs a non-empty word".into(),
            ));
        }
        let n = word.len();
        let p = (1..=n)
            .find(|&p| n % p == 0 && (p..n).all(|i| word.symbols[i] == word.symbols[i - p]))
            .unwrap_or(n);
        let root = word.prefix(p);
        let least = root
            .rotations()
            .min_by(|a, b| a.symbols.cmp(&b.symbols))
            .unwrap();
        Ok(Self { word: least })
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn period(&self) -> usize {
        self.word.len()
    }

    pub fn frequency(&self, symbol: u16) -> f64 {
        self.word.frequency(symbol)
    }
}

impl fmt::Display for PeriodicOrbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.word)
    }
}

/// Length-n words with an edge w -> w' whenever the last n-1 symbols of w are
/// the first n-1 symbols of w'.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WordGraph {
    depth: usize,
    nodes: Vec<Word>,
    edges: Vec<(usize, usize)>,
}

impl WordGraph {
    pub fn from_words(depth: usize, words: impl IntoIterator<Item = Word>) -> Result<Self> {
        let mut nodes: Vec<Word> = words.into_iter().collect();
        if let Some(w) = nodes.iter().find(|w| w.len() != depth) {
            return Err(Error::LengthMismatch {
                left: w.len(),
                right: depth,
            });
        }
        nodes.sort();
        nodes.dedup();
        let mut by_prefix: HashMap<&[u16], Vec<usize>> = HashMap::new();
        for (i, w) in nodes.iter().enumerate() {
            let key = if depth == 0 {
                &w.symbols[..]
            } else {
                &w.symbols[..depth - 1]
            };
            by_prefix.entry(key).or_default().push(i);
        }
        let mut edges = Vec::new();
        for (i, w) in nodes.iter().enumerate() {
            if depth == 0 {
                continue;
            }
            if let Some(targets) = by_prefix.get(&w.symbols[1..]) {
                for &j in targets {
                    edges.push((i, j));
                }
            }
        }
        Ok(Self {
            depth,
            nodes,
            edges,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn nodes(&self) -> &[Word] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph survivors {\n");
        for (i, w) in self.nodes.iter().enumerate() {
            s.push_str(&format!("  n{i} [label=\"{w}\"];\n"));
        }
        for &(a, b) in &self.edges {
            s.push_str(&format!("  n{a} -> n{b};\n"));
        }
        s.push_str("}\n");
        s
    }
}

/// Strongly connected components that carry at least one edge, each sorted,
/// listed in order of their least word.
pub fn strongly_connected_components(g: &WordGraph) -> Vec<Vec<Word>> {
    let mut pg: DiGraph<(), ()> = DiGraph::with_capacity(g.nodes.len(), g.edges.len());
    let idx: Vec<_> = (0..g.nodes.len()).map(|_| pg.add_node(())).collect();
    let mut self_loop = vec![false; g.nodes.len()];
    for &(a, b) in &g.edges {
        pg.add_edge(idx[a], idx[b], ());
        if a == b {
            self_loop[a] = true;
        }
    }
    let mut comps: Vec<Vec<Word>> = tarjan_scc(&pg)
        .into_iter()
        .filter(|c| c.len() > 1 || self_loop[c[0].index()])
        .map(|c| {
            let mut ws: Vec<Word> = c.iter().map(|n| g.nodes[n.index()].clone()).collect();
            ws.sort();
            ws
        })
        .collect();
    comps.sort();
    comps
}
