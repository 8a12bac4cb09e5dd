//! Conditioning labels: sets of API call names, type names and keywords.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aml::{type_check, ApiDatabase, Program, Stmt, TypeError};
use crate::sketch::{Sketch, Symbol, TreeNode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceKind {
    Calls,
    Types,
    Keys,
}

impl EvidenceKind {
    pub const ALL: [EvidenceKind; 3] = [EvidenceKind::Calls, EvidenceKind::Types, EvidenceKind::Keys];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EvidenceKind::Calls => "calls",
            EvidenceKind::Types => "types",
            EvidenceKind::Keys => "keys",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    #[serde(default)]
    pub calls: BTreeSet<String>,
    #[serde(default)]
    pub types: BTreeSet<String>,
    #[serde(default)]
    pub keys: BTreeSet<String>,
}

impl Label {
    pub fn get(&self, kind: EvidenceKind) -> &BTreeSet<String> {
        match kind {
            EvidenceKind::Calls => &self.calls,
            EvidenceKind::Types => &self.types,
            EvidenceKind::Keys => &self.keys,
        }
    }

    pub fn get_mut(&mut self, kind: EvidenceKind) -> &mut BTreeSet<String> {
        match kind {
            EvidenceKind::Calls => &mut self.calls,
            EvidenceKind::Types => &mut self.types,
            EvidenceKind::Keys => &mut self.keys,
        }
    }

    pub fn len(&self) -> usize {
        self.calls.len() + self.types.len() + self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Componentwise subset.
    pub fn is_subset(&self, other: &Label) -> bool {
        EvidenceKind::ALL.iter().all(|&k| self.get(k).is_subset(other.get(k)))
    }
}

/// Splits an identifier at lower-to-upper case boundaries and at
/// letter/digit boundaries, lowercasing the fragments.
pub fn split_camel_case(name: &str) -> Vec<String> {
    let chars: Vec<char> = name.chars().collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if i > 0 {
            let p = chars[i - 1];
            let boundary = (p.is_lowercase() && c.is_uppercase())
                || (p.is_ascii_digit() != c.is_ascii_digit() && p.is_alphanumeric() && c.is_alphanumeric());
            if boundary && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Label of a well-typed program: the names of the API methods it calls,
/// the API types it touches (receivers, arguments, results and caught
/// exceptions), and the camel-case keywords of both.
pub fn extract_label(p: &Program, db: &ApiDatabase) -> Result<Label, TypeError> {
    let typing = type_check(p, db)?;
    let mut label = Label::default();
    for rc in &typing.calls {
        label.calls.insert(rc.sig.name.clone());
        label.types.insert(rc.receiver.to_string());
        label.types.extend(rc.args.iter().map(|t| t.to_string()));
        if let Some(r) = &rc.sig.returns {
            label.types.insert(r.to_string());
        }
    }
    collect_catch_types(p, &mut label.types);
    label.keys = label.calls.iter().chain(&label.types).flat_map(|n| split_camel_case(n)).collect();
    Ok(label)
}

fn collect_catch_types(p: &Program, out: &mut BTreeSet<String>) {
    for s in &p.stmts {
        match s {
            Stmt::If(_, a, b) => {
                collect_catch_types(a, out);
                collect_catch_types(b, out);
            }
            Stmt::While(_, b) => collect_catch_types(b, out),
            Stmt::Try(b, cs) => {
                collect_catch_types(b, out);
                for c in cs {
                    out.insert(c.ty.to_string());
                    collect_catch_types(&c.body, out);
                }
            }
            _ => {}
        }
    }
}

/// Number of elements kept when revealing `fraction` of a set of `n`.
pub fn kept_count(n: usize, fraction: f64) -> usize {
    let f = fraction.clamp(0.0, 1.0);
    // the epsilon absorbs products like 0.7 * 10 = 7.000000000000001
    ((f * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Keeps `ceil(fraction * |set|)` uniformly chosen elements of each kind.
pub fn subsample_label<R: Rng + ?Sized>(x: &Label, fraction: f64, rng: &mut R) -> Label {
    let mut out = Label::default();
    for kind in EvidenceKind::ALL {
        let items: Vec<&String> = x.get(kind).iter().collect();
        let keep = kept_count(items.len(), fraction);
        let picked = index::sample(rng, items.len(), keep);
        out.get_mut(kind).extend(picked.into_iter().map(|i| items[i].clone()));
    }
    out
}

/// Dense index over a set of strings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Index {
    items: Vec<String>,
    pos: BTreeMap<String, usize>,
}

impl Index {
    pub fn new(items: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = items.into_iter().collect();
        Self::from(set.into_iter().collect::<Vec<_>>())
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.pos.get(s).copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

impl From<Vec<String>> for Index {
    fn from(items: Vec<String>) -> Self {
        let pos = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Index { items, pos }
    }
}

impl From<Index> for Vec<String> {
    fn from(i: Index) -> Self {
        i.items
    }
}

/// Decoder output vocabulary over grammar symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Symbol>", into = "Vec<Symbol>")]
pub struct SymbolIndex {
    items: Vec<Symbol>,
    pos: BTreeMap<Symbol, usize>,
}

impl SymbolIndex {
    pub fn get(&self, s: &Symbol) -> Option<usize> {
        self.pos.get(s).copied()
    }

    pub fn symbol(&self, i: usize) -> &Symbol {
        &self.items[i]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Symbol] {
        &self.items
    }
}

impl From<Vec<Symbol>> for SymbolIndex {
    fn from(items: Vec<Symbol>) -> Self {
        let pos = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        SymbolIndex { items, pos }
    }
}

impl From<SymbolIndex> for Vec<Symbol> {
    fn from(i: SymbolIndex) -> Self {
        i.items
    }
}

/// Label element indices for the encoder, per kind.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodedLabel {
    pub elements: [Vec<usize>; 3],
}

impl EncodedLabel {
    pub fn len(&self) -> usize {
        self.elements.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub calls: Index,
    pub types: Index,
    pub keys: Index,
    pub symbols: SymbolIndex,
}

impl Vocabularies {
    /// Builds the evidence vocabularies from the labels and the decoder
    /// vocabulary from the symbols of the sketches' decoder trees.
    pub fn build<'a>(pairs: impl IntoIterator<Item = (&'a Label, &'a Sketch)>) -> Self {
        let mut sets: [BTreeSet<String>; 3] = Default::default();
        let mut symbols = BTreeSet::new();
        for (label, sketch) in pairs {
            for k in EvidenceKind::ALL {
                sets[k.index()].extend(label.get(k).iter().cloned());
            }
            collect_symbols(&crate::sketch::tree::to_tree(sketch), &mut symbols);
        }
        let mut items: Vec<Symbol> = Symbol::FIXED.to_vec();
        items.extend(symbols.into_iter().filter(|s| !Symbol::FIXED.contains(s)));
        let [calls, types, keys] = sets;
        Vocabularies {
            calls: Index::new(calls),
            types: Index::new(types),
            keys: Index::new(keys),
            symbols: SymbolIndex::from(items),
        }
    }

    pub fn evidence(&self, kind: EvidenceKind) -> &Index {
        match kind {
            EvidenceKind::Calls => &self.calls,
            EvidenceKind::Types => &self.types,
            EvidenceKind::Keys => &self.keys,
        }
    }

    /// Encodes a label, dropping (and reporting) out-of-vocabulary elements.
    pub fn encode_label(&self, x: &Label) -> (EncodedLabel, Vec<String>) {
        let mut enc = EncodedLabel::default();
        let mut dropped = Vec::new();
        for kind in EvidenceKind::ALL {
            for item in x.get(kind) {
                match self.evidence(kind).get(item) {
                    Some(i) => enc.elements[kind.index()].push(i),
                    None => dropped.push(format!("{}:{item}", kind.name())),
                }
            }
        }
        if !dropped.is_empty() {
            log::warn!("dropping out-of-vocabulary label elements: {}", dropped.join(", "));
        }
        (enc, dropped)
    }
}

fn collect_symbols(n: &TreeNode, out: &mut BTreeSet<Symbol>) {
    out.insert(n.symbol.clone());
    if let Some(c) = &n.child {
        collect_symbols(c, out);
    }
    if let Some(s) = &n.sibling {
        collect_symbols(s, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aml::parse_program;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn camel_case() {
        assert_eq!(split_camel_case("readLine"), vec!["read", "line"]);
        assert_eq!(split_camel_case("x"), vec!["x"]);
        assert_eq!(split_camel_case("FileNotFoundException"), vec!["file", "not", "found", "exception"]);
        assert_eq!(split_camel_case("utf8Decode"), vec!["utf", "8", "decode"]);
        assert_eq!(split_camel_case("URLConnection"), vec!["urlconnection"]);
        assert!(split_camel_case("").is_empty());
    }

    fn db() -> ApiDatabase {
        ApiDatabase::builder()
            .types(&["String", "FileReader", "BufferedReader", "IOException"])
            .method("FileReader", "new", &["String"], Some("FileReader"))
            .method("BufferedReader", "new", &["FileReader"], Some("BufferedReader"))
            .method("BufferedReader", "readLine", &[], Some("String"))
            .build()
            .unwrap()
    }

    #[test]
    fn label_of_skip_is_empty() {
        assert!(extract_label(&Program::skip(), &db()).unwrap().is_empty());
    }

    #[test]
    fn label_of_reader_program() {
        let p = parse_program(
            "try { let fr = FileReader.new($String); let br = BufferedReader.new(fr);
             call br.readLine() } catch (e: IOException) { skip }",
        )
        .unwrap();
        let x = extract_label(&p, &db()).unwrap();
        let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(x.calls, set(&["new", "readLine"]));
        assert_eq!(x.types, set(&["BufferedReader", "FileReader", "IOException", "String"]));
        assert!(x.keys.contains("read") && x.keys.contains("line"));
        assert!(x.keys.contains("buffered") && x.keys.contains("ioexception"));
    }

    #[test]
    fn subsample_edges() {
        let x = Label {
            calls: ["a", "b", "c"].iter().map(|s| s.to_string()).collect(),
            types: ["T"].iter().map(|s| s.to_string()).collect(),
            keys: BTreeSet::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(subsample_label(&x, 1.0, &mut rng), x);
        assert!(subsample_label(&x, 0.0, &mut rng).is_empty());
        let half = subsample_label(&x, 0.5, &mut rng);
        assert_eq!((half.calls.len(), half.types.len()), (2, 1));
        assert!(half.is_subset(&x));
        assert_eq!(kept_count(10, 0.7), 7);
        assert_eq!(kept_count(4, 0.25), 1);
        assert_eq!(kept_count(1, 0.01), 1);
    }

    #[test]
    fn subsample_is_seeded() {
        let x = Label { keys: (0..20).map(|i| i.to_string()).collect(), ..Default::default() };
        let a = subsample_label(&x, 0.3, &mut ChaCha8Rng::seed_from_u64(7));
        let b = subsample_label(&x, 0.3, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn vocab_indices_are_dense() {
        let x = Label { calls: ["b", "a"].iter().map(|s| s.to_string()).collect(), ..Default::default() };
        let v = Vocabularies::build([(&x, &Sketch::skip())]);
        assert_eq!(v.calls.get("a"), Some(0));
        assert_eq!(v.calls.get("b"), Some(1));
        assert_eq!(v.symbols.len(), Symbol::FIXED.len());
        let (enc, dropped) =
            v.encode_label(&Label { calls: ["a", "zz"].iter().map(|s| s.to_string()).collect(), ..Default::default() });
        assert_eq!(enc.elements[0], vec![0]);
        assert_eq!(dropped, vec!["calls:zz"]);
    }
}
