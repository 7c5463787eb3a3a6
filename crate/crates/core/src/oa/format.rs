//! Line-oriented text format for array collections.
//!
//! ```text
//! oa n=<n> q=<q> k=<k> d=<d>
//! S <i1> ... <ik>
//! <symbol> ... <symbol>     (one row per line)
//! ...
//! ```
//!
//! Subsets are 0-based, written in lexicographic order with rows in
//! lexicographic order. A file may instead hold a one-line generator
//! shorthand, e.g. `gen ksum q=4 k=2 t=0 n=3`. Parsing is strict: unknown
//! directives are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{OACollection, OrthogonalArray};
use crate::algebra::{CyclicGroup, PrimeField};
use crate::error::{Error, Result};

/// A parsed explicit collection, before strength or index verification.
/// `cmd verify` reports on this; the adversary pipeline upgrades it to an
/// [`OACollection`] via [`CollectionData::verify`].
#[derive(Debug, Clone)]
pub struct CollectionData {
    pub n: usize,
    pub q: u32,
    pub k: usize,
    pub d: usize,
    pub arrays: BTreeMap<Vec<usize>, OrthogonalArray>,
}

impl CollectionData {
    pub fn verify(self) -> Result<OACollection> {
        OACollection::new(self.n, self.q, self.k, self.d, self.arrays)
    }
}

/// Generator shorthands expressible as a single line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenSpec {
    Ksum { q: u32, k: usize, t: u32, n: usize },
    Kdist { q: u32, k: usize, n: usize },
    Ddegree { q: u32, deg: usize, k: usize, n: usize, rank_indexed: bool },
}

impl GenSpec {
    pub fn expand(&self) -> Result<OACollection> {
        match *self {
            GenSpec::Ksum { q, k, t, n } => {
                let g = CyclicGroup::new(q)?;
                super::gen_ksum(&g, k, t, n)
            }
            GenSpec::Kdist { q, k, n } => super::gen_kdist(q, k, n),
            GenSpec::Ddegree { q, deg, k, n, rank_indexed } => {
                let f = PrimeField::new(q)?;
                if rank_indexed {
                    super::gen_ddegree_rank_indexed(&f, deg, k, n)
                } else {
                    super::gen_ddegree(&f, deg, k, n)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum ParsedFile {
    Collection(CollectionData),
    Generator(GenSpec),
}

impl ParsedFile {
    /// Expands a generator or verifies an explicit collection.
    pub fn into_collection(self) -> Result<OACollection> {
        match self {
            ParsedFile::Collection(data) => data.verify(),
            ParsedFile::Generator(spec) => spec.expand(),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn kv(token: &str, key: &str, line: usize) -> Result<u64> {
    let (k, v) = token
        .split_once('=')
        .ok_or_else(|| parse_err(line, format!("expected {key}=<value>, got `{token}`")))?;
    if k != key {
        return Err(parse_err(line, format!("expected key `{key}`, got `{k}`")));
    }
    v.parse::<u64>()
        .map_err(|_| parse_err(line, format!("invalid value for `{key}`: `{v}`")))
}

pub fn parse(text: &str) -> Result<ParsedFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (lno, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    match tokens[0] {
        "gen" => {
            if let Some((extra, _)) = lines.next() {
                return Err(parse_err(extra, "generator files are a single line"));
            }
            parse_gen(&tokens, lno)
        }
        "oa" => parse_oa(&tokens, lno, lines),
        other => Err(parse_err(lno, format!("unknown directive `{other}`"))),
    }
}

fn parse_gen(tokens: &[&str], lno: usize) -> Result<ParsedFile> {
    if tokens.len() < 2 {
        return Err(parse_err(lno, "missing generator family"));
    }
    let spec = match tokens[1] {
        "ksum" => {
            if tokens.len() != 6 {
                return Err(parse_err(lno, "usage: gen ksum q=<q> k=<k> t=<t> n=<n>"));
            }
            GenSpec::Ksum {
                q: kv(tokens[2], "q", lno)? as u32,
                k: kv(tokens[3], "k", lno)? as usize,
                t: kv(tokens[4], "t", lno)? as u32,
                n: kv(tokens[5], "n", lno)? as usize,
            }
        }
        "kdist" => {
            if tokens.len() != 5 {
                return Err(parse_err(lno, "usage: gen kdist q=<q> k=<k> n=<n>"));
            }
            GenSpec::Kdist {
                q: kv(tokens[2], "q", lno)? as u32,
                k: kv(tokens[3], "k", lno)? as usize,
                n: kv(tokens[4], "n", lno)? as usize,
            }
        }
        "ddegree" => {
            if tokens.len() != 6 && tokens.len() != 7 {
                return Err(parse_err(
                    lno,
                    "usage: gen ddegree q=<q> deg=<deg> k=<k> n=<n> [points=index|rank]",
                ));
            }
            let rank_indexed = match tokens.get(6) {
                None => false,
                Some(&"points=index") => false,
                Some(&"points=rank") => true,
                Some(other) => {
                    return Err(parse_err(lno, format!("unknown option `{other}`")));
                }
            };
            GenSpec::Ddegree {
                q: kv(tokens[2], "q", lno)? as u32,
                deg: kv(tokens[3], "deg", lno)? as usize,
                k: kv(tokens[4], "k", lno)? as usize,
                n: kv(tokens[5], "n", lno)? as usize,
                rank_indexed,
            }
        }
        other => return Err(parse_err(lno, format!("unknown generator family `{other}`"))),
    };
    Ok(ParsedFile::Generator(spec))
}

fn parse_oa<'a>(
    tokens: &[&str],
    lno: usize,
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<ParsedFile> {
    if tokens.len() != 5 {
        return Err(parse_err(lno, "usage: oa n=<n> q=<q> k=<k> d=<d>"));
    }
    let n = kv(tokens[1], "n", lno)? as usize;
    let q = kv(tokens[2], "q", lno)? as u32;
    let k = kv(tokens[3], "k", lno)? as usize;
    let d = kv(tokens[4], "d", lno)? as usize;
    if q < 2 || q > u16::MAX as u32 {
        return Err(parse_err(lno, format!("alphabet size {q} unsupported")));
    }

    let mut arrays: BTreeMap<Vec<usize>, OrthogonalArray> = BTreeMap::new();
    let mut current: Option<(usize, Vec<usize>, Vec<Vec<u16>>)> = None;

    let flush = |cur: Option<(usize, Vec<usize>, Vec<Vec<u16>>)>,
                     arrays: &mut BTreeMap<Vec<usize>, OrthogonalArray>|
     -> Result<()> {
        if let Some((slno, subset, rows)) = cur {
            if rows.is_empty() {
                return Err(parse_err(slno, format!("subset {subset:?} has no rows")));
            }
            let arr = OrthogonalArray::new(q, k, rows)
                .map_err(|e| parse_err(slno, e.to_string()))?;
            if arrays.insert(subset.clone(), arr).is_some() {
                return Err(parse_err(slno, format!("duplicate subset {subset:?}")));
            }
        }
        Ok(())
    };

    for (lno, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0] == "S" {
            flush(current.take(), &mut arrays)?;
            if tokens.len() != k + 1 {
                return Err(parse_err(lno, format!("subset line needs {k} indices")));
            }
            let subset: Vec<usize> = tokens[1..]
                .iter()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| parse_err(lno, format!("invalid index `{t}`")))
                })
                .collect::<Result<_>>()?;
            if !subset.windows(2).all(|w| w[0] < w[1]) {
                return Err(parse_err(lno, "subset indices must be strictly increasing"));
            }
            if subset.iter().any(|&e| e >= n) {
                return Err(parse_err(lno, format!("subset index out of range 0..{n}")));
            }
            current = Some((lno, subset, Vec::new()));
        } else if tokens[0].chars().all(|c| c.is_ascii_digit()) {
            let Some((_, _, rows)) = current.as_mut() else {
                return Err(parse_err(lno, "row before any `S` directive"));
            };
            if tokens.len() != k {
                return Err(parse_err(lno, format!("row needs {k} symbols")));
            }
            let row: Vec<u16> = tokens
                .iter()
                .map(|t| {
                    let v = t
                        .parse::<u32>()
                        .map_err(|_| parse_err(lno, format!("invalid symbol `{t}`")))?;
                    if v > q {
                        return Err(parse_err(
                            lno,
                            format!("symbol {v} out of range 0..={q} (q is the dummy)"),
                        ));
                    }
                    Ok(v as u16)
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        } else {
            return Err(parse_err(lno, format!("unknown directive `{}`", tokens[0])));
        }
    }
    flush(current.take(), &mut arrays)?;

    let expected = crate::algebra::binom(n as i64, k as i64);
    if arrays.len() as u128 != expected {
        return Err(parse_err(
            0,
            format!("collection has {} subsets, expected {expected}", arrays.len()),
        ));
    }
    Ok(ParsedFile::Collection(CollectionData { n, q, k, d, arrays }))
}

/// Writes a collection in canonical form: subsets lexicographic, rows
/// lexicographic, one trailing newline.
pub fn write_collection(c: &OACollection) -> String {
    let mut out = String::new();
    writeln!(out, "oa n={} q={} k={} d={}", c.n(), c.q(), c.k(), c.d()).unwrap();
    for (s, arr) in c.arrays() {
        let idx: Vec<String> = s.iter().map(|e| e.to_string()).collect();
        writeln!(out, "S {}", idx.join(" ")).unwrap();
        for row in arr.rows() {
            let syms: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", syms.join(" ")).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oa::gen_kdist;

    #[test]
    fn round_trip() {
        let coll = gen_kdist(3, 2, 3).unwrap();
        let text = write_collection(&coll);
        let parsed = parse(&text).unwrap().into_collection().unwrap();
        assert_eq!(write_collection(&parsed), text);
    }

    #[test]
    fn generator_shorthand() {
        let parsed = parse("gen kdist q=3 k=2 n=3\n").unwrap();
        let coll = parsed.into_collection().unwrap();
        assert_eq!(write_collection(&coll), write_collection(&gen_kdist(3, 2, 3).unwrap()));

        let parsed = parse("gen ddegree q=7 deg=1 k=4 n=5 points=rank\n").unwrap();
        let coll = parsed.into_collection().unwrap();
        assert_eq!(coll.d(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "oa n=3 q=3 k=2 d=1\nS 0 1\n0 0\nwat 1\n";
        match parse(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }

        let bad_symbol = "oa n=2 q=3 k=2 d=0\nS 0 1\n0 9\n";
        match parse(bad_symbol) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_directive_rejected() {
        assert!(parse("oops n=3\n").is_err());
        assert!(parse("gen frobnicate q=2\n").is_err());
    }

    #[test]
    fn incomplete_collection_rejected() {
        let text = "oa n=3 q=3 k=2 d=1\nS 0 1\n0 0\n1 1\n2 2\n";
        assert!(parse(text).is_err());
    }
}
