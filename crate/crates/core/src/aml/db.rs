use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::TypeName;

/// `(τ1, …, τk) → τ0` attached to a method of a receiver type. Constructors
/// are methods named `new` returning their receiver.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodSignature {
    pub receiver: TypeName,
    pub name: String,
    pub params: Vec<TypeName>,
    /// `None` for void methods.
    pub returns: Option<TypeName>,
}

impl MethodSignature {
    pub fn is_constructor(&self) -> bool {
        self.name == "new"
    }
}

impl fmt::Display for MethodSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.receiver, self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        match &self.returns {
            Some(r) => write!(f, ")->{r}"),
            None => f.write_str(")->void"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("duplicate signature {0}")]
    DuplicateSignature(String),
    #[error("unknown type `{ty}` in {context}")]
    UnknownType { ty: String, context: String },
    #[error("duplicate type `{0}`")]
    DuplicateType(String),
    #[error("constructor {0} must return its receiver type")]
    BadConstructor(String),
    #[error("subtyping is not a partial order: {0} and {1} are mutual subtypes")]
    SubtypeCycle(String, String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDb {
    #[serde(default)]
    types: Vec<String>,
    #[serde(default)]
    methods: Vec<RawMethod>,
    #[serde(default)]
    subtypes: Vec<RawSubtype>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    receiver: String,
    name: String,
    #[serde(default)]
    params: Vec<String>,
    returns: String,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSubtype {
    sub: String,
    sup: String,
}

/// The universe of API types and method signatures programs are typed
/// against, with a reflexive-transitive subtyping relation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ApiDatabase {
    types: BTreeSet<TypeName>,
    methods: Vec<MethodSignature>,
    /// Declared direct supertype edges.
    edges: Vec<(TypeName, TypeName)>,
    /// Strict supertypes of each type (transitive closure of `edges`).
    supers: BTreeMap<TypeName, BTreeSet<TypeName>>,
    by_name: BTreeMap<String, Vec<usize>>,
}

impl ApiDatabase {
    pub fn builder() -> DbBuilder {
        DbBuilder::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DbError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| DbError::Io { path: path.display().to_string(), source })?;
        Self::from_yaml(&text)
    }

    pub fn from_yaml(text: &str) -> Result<Self, DbError> {
        let raw: RawDb = if text.trim().is_empty() {
            RawDb::default()
        } else {
            serde_yaml::from_str(text).map_err(|e| {
                let (line, col) = e.location().map(|l| (l.line(), l.column())).unwrap_or((0, 0));
                DbError::Parse { line, col, message: e.to_string() }
            })?
        };
        let mut b = DbBuilder::default();
        for t in raw.types {
            b = b.ty(&t);
        }
        for m in raw.methods {
            let returns = if m.returns == "void" { None } else { Some(m.returns.as_str()) };
            let params: Vec<&str> = m.params.iter().map(String::as_str).collect();
            b = b.method(&m.receiver, &m.name, &params, returns);
        }
        for s in raw.subtypes {
            b = b.subtype(&s.sub, &s.sup);
        }
        b.build()
    }

    pub fn to_yaml(&self) -> String {
        let raw = RawDb {
            types: self.types.iter().map(|t| t.to_string()).collect(),
            methods: self
                .methods
                .iter()
                .map(|m| RawMethod {
                    receiver: m.receiver.to_string(),
                    name: m.name.clone(),
                    params: m.params.iter().map(|p| p.to_string()).collect(),
                    returns: m.returns.as_ref().map_or("void".to_string(), |r| r.to_string()),
                })
                .collect(),
            subtypes: self.edges.iter().map(|(a, b)| RawSubtype { sub: a.to_string(), sup: b.to_string() }).collect(),
        };
        serde_yaml::to_string(&raw).expect("database serializes")
    }

    pub fn types(&self) -> &BTreeSet<TypeName> {
        &self.types
    }

    pub fn methods(&self) -> &[MethodSignature] {
        &self.methods
    }

    pub fn contains_type(&self, t: &TypeName) -> bool {
        self.types.contains(t)
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// `sub <: sup` under the reflexive-transitive closure of declared edges.
    pub fn is_subtype(&self, sub: &TypeName, sup: &TypeName) -> bool {
        sub == sup || self.supers.get(sub).is_some_and(|s| s.contains(sup))
    }

    pub fn methods_named<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a MethodSignature> + 'a {
        self.by_name.get(name).into_iter().flatten().map(move |&i| &self.methods[i])
    }

    /// Resolves a call with the given receiver and argument types to a single
    /// signature. Methods declared on supertypes of the receiver are visible,
    /// except constructors, which must be declared on the receiver itself.
    pub fn resolve(
        &self,
        receiver: &TypeName,
        name: &str,
        args: &[TypeName],
    ) -> Result<&MethodSignature, ResolveError> {
        let visible: Vec<&MethodSignature> =
            self.methods_named(name)
                .filter(|m| {
                    if m.is_constructor() {
                        &m.receiver == receiver
                    } else {
                        self.is_subtype(receiver, &m.receiver)
                    }
                })
                .collect();
        if visible.is_empty() {
            return Err(ResolveError::NoMethod);
        }
        let arity: Vec<&MethodSignature> = visible.into_iter().filter(|m| m.params.len() == args.len()).collect();
        if arity.is_empty() {
            return Err(ResolveError::Arity);
        }
        let applicable: Vec<&MethodSignature> =
            arity.into_iter().filter(|m| m.params.iter().zip(args).all(|(p, a)| self.is_subtype(a, p))).collect();
        match applicable.len() {
            0 => Err(ResolveError::Types),
            1 => Ok(applicable[0]),
            _ => {
                let more_specific = |a: &MethodSignature, b: &MethodSignature| {
                    self.is_subtype(&a.receiver, &b.receiver)
                        && a.params.iter().zip(&b.params).all(|(x, y)| self.is_subtype(x, y))
                };
                let best: Vec<&&MethodSignature> =
                    applicable.iter().filter(|a| applicable.iter().all(|b| more_specific(a, b))).collect();
                match best.as_slice() {
                    [one] => Ok(one),
                    _ => Err(ResolveError::Ambiguous),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveError {
    NoMethod,
    Arity,
    Types,
    Ambiguous,
}

#[derive(Default)]
pub struct DbBuilder {
    types: Vec<String>,
    methods: Vec<(String, String, Vec<String>, Option<String>)>,
    subtypes: Vec<(String, String)>,
}

impl DbBuilder {
    pub fn ty(mut self, name: &str) -> Self {
        self.types.push(name.to_string());
        self
    }

    pub fn types(mut self, names: &[&str]) -> Self {
        self.types.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn method(mut self, receiver: &str, name: &str, params: &[&str], returns: Option<&str>) -> Self {
        self.methods.push((
            receiver.to_string(),
            name.to_string(),
            params.iter().map(|s| s.to_string()).collect(),
            returns.map(str::to_string),
        ));
        self
    }

    pub fn subtype(mut self, sub: &str, sup: &str) -> Self {
        self.subtypes.push((sub.to_string(), sup.to_string()));
        self
    }

    pub fn build(self) -> Result<ApiDatabase, DbError> {
        let mut types = BTreeSet::new();
        for t in self.types {
            if !types.insert(TypeName::new(t.clone())) {
                return Err(DbError::DuplicateType(t));
            }
        }
        let check = |t: &str, context: &dyn Fn() -> String| {
            if types.contains(&TypeName::from(t)) {
                Ok(TypeName::from(t))
            } else {
                Err(DbError::UnknownType { ty: t.to_string(), context: context() })
            }
        };
        let mut methods = Vec::new();
        let mut seen = BTreeSet::new();
        for (recv, name, params, returns) in self.methods {
            let ctx = || format!("method {recv}.{name}");
            let receiver = check(&recv, &ctx)?;
            let params = params.iter().map(|p| check(p, &ctx)).collect::<Result<Vec<_>, _>>()?;
            let returns = returns.as_deref().map(|r| check(r, &ctx)).transpose()?;
            let sig = MethodSignature { receiver, name, params, returns };
            if sig.is_constructor() && sig.returns.as_ref() != Some(&sig.receiver) {
                return Err(DbError::BadConstructor(sig.to_string()));
            }
            if !seen.insert((sig.receiver.clone(), sig.name.clone(), sig.params.clone())) {
                return Err(DbError::DuplicateSignature(sig.to_string()));
            }
            methods.push(sig);
        }
        let mut edges = Vec::new();
        for (sub, sup) in self.subtypes {
            let ctx = || format!("subtype edge {sub} <: {sup}");
            edges.push((check(&sub, &ctx)?, check(&sup, &ctx)?));
        }
        edges.sort();
        edges.dedup();
        let mut supers: BTreeMap<TypeName, BTreeSet<TypeName>> = BTreeMap::new();
        for t in &types {
            let mut reach = BTreeSet::new();
            let mut stack = vec![t.clone()];
            while let Some(cur) = stack.pop() {
                for (a, b) in &edges {
                    if a == &cur && reach.insert(b.clone()) {
                        stack.push(b.clone());
                    }
                }
            }
            if reach.contains(t) {
                let other = edges.iter().find(|(a, _)| a == t).map(|(_, b)| b.clone()).unwrap();
                return Err(DbError::SubtypeCycle(t.to_string(), other.to_string()));
            }
            if !reach.is_empty() {
                supers.insert(t.clone(), reach);
            }
        }
        let mut by_name: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, m) in methods.iter().enumerate() {
            by_name.entry(m.name.clone()).or_default().push(i);
        }
        Ok(ApiDatabase { types, methods, edges, supers, by_name })
    }
}
