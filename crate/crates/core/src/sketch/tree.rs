//! Decoder view of a sketch: a tree whose nodes are grammar symbols joined
//! by `child` and `sibling` edges, and its production paths.
//!
//! Layout of the tree:
//!
//! * a statement list is a sibling chain of its statements;
//! * `while` and `if` have their condition as child: a sibling chain of
//!   abstract calls (or the single `<nocond>` symbol for an empty
//!   condition) whose last element has the loop body (the `then` branch)
//!   as child;
//! * `if` is always followed on its sibling edge by `else`, whose child is
//!   the else branch;
//! * `try` has its body as child and is followed on its sibling chain by its
//!   `catch` nodes; a `catch` has the exception type as child, and the
//!   exception type has the handler body as child.
//!
//! `<end>` never appears in the tree. It is the decoder's prediction for a
//! sibling edge that leads nowhere.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Cexp, Cseq, Sketch, SketchStmt};
use crate::aml::TypeName;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Root,
    End,
    NoCond,
    Skip,
    While,
    If,
    Else,
    Try,
    Catch,
    Call(Cexp),
    Exception(TypeName),
}

impl Symbol {
    /// Symbols present in every decoder vocabulary.
    pub const FIXED: [Symbol; 9] = [
        Symbol::Root,
        Symbol::End,
        Symbol::NoCond,
        Symbol::Skip,
        Symbol::While,
        Symbol::If,
        Symbol::Else,
        Symbol::Try,
        Symbol::Catch,
    ];

    fn starts_stmt(&self) -> bool {
        matches!(self, Symbol::Skip | Symbol::While | Symbol::If | Symbol::Try | Symbol::Call(_))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Root => f.write_str("root"),
            Symbol::End => f.write_str("<end>"),
            Symbol::NoCond => f.write_str("<nocond>"),
            Symbol::Skip => f.write_str("skip"),
            Symbol::While => f.write_str("while"),
            Symbol::If => f.write_str("if"),
            Symbol::Else => f.write_str("else"),
            Symbol::Try => f.write_str("try"),
            Symbol::Catch => f.write_str("catch"),
            Symbol::Call(c) => write!(f, "{c}"),
            Symbol::Exception(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Edge {
    Child,
    Sibling,
}

impl Edge {
    pub fn index(self) -> usize {
        match self {
            Edge::Child => 0,
            Edge::Sibling => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub symbol: Symbol,
    pub child: Option<Box<TreeNode>>,
    pub sibling: Option<Box<TreeNode>>,
}

impl TreeNode {
    pub fn leaf(symbol: Symbol) -> Self {
        TreeNode { symbol, child: None, sibling: None }
    }

    pub fn get(&self, edge: Edge) -> Option<&TreeNode> {
        match edge {
            Edge::Child => self.child.as_deref(),
            Edge::Sibling => self.sibling.as_deref(),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.child.as_ref().map_or(0, |c| c.size()) + self.sibling.as_ref().map_or(0, |s| s.size())
    }
}

/// A root-to-leaf walk through the decoder tree: each node with the edge
/// taken out of it. The final node has no outgoing edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductionPath(pub Vec<(Symbol, Option<Edge>)>);

impl fmt::Display for ProductionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, e)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            let e = match e {
                Some(Edge::Child) => "c",
                Some(Edge::Sibling) => "s",
                None => "·",
            };
            write!(f, "({s},{e})")?;
        }
        Ok(())
    }
}

/// Position a node occupies, which fixes the edges it may have.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Root,
    Stmt,
    Cond,
    Exception,
}

/// Symbols a slot may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Allowed {
    Stmt,
    StmtOrEnd,
    StmtCatchOrEnd,
    Else,
    CondStart,
    CondOrEnd,
    Exception,
}

impl Allowed {
    pub fn admits(self, s: &Symbol) -> bool {
        match self {
            Allowed::Stmt => s.starts_stmt(),
            Allowed::StmtOrEnd => s.starts_stmt() || *s == Symbol::End,
            Allowed::StmtCatchOrEnd => s.starts_stmt() || matches!(s, Symbol::End | Symbol::Catch),
            Allowed::Else => *s == Symbol::Else,
            Allowed::CondStart => matches!(s, Symbol::Call(_) | Symbol::NoCond),
            Allowed::CondOrEnd => matches!(s, Symbol::Call(_) | Symbol::End),
            Allowed::Exception => matches!(s, Symbol::Exception(_)),
        }
    }
}

/// An outgoing edge of a node the decoder must predict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub edge: Edge,
    pub allowed: Allowed,
    /// Role of the node placed in this slot.
    pub role: Role,
}

const fn slot(edge: Edge, allowed: Allowed, role: Role) -> Slot {
    Slot { edge, allowed, role }
}

/// The next slot of a node with `symbol` in `role`, given the slots already
/// visited and whether the last one was filled. Child slots are visited
/// before sibling slots, except on condition calls, where the child (the
/// body) exists only once the condition chain has ended.
pub fn next_slot(symbol: &Symbol, role: Role, visited: &[(Slot, bool)]) -> Option<Slot> {
    use Allowed as A;
    let plan: &[Slot] = match (role, symbol) {
        (Role::Root, _) => &[slot(Edge::Child, A::Stmt, Role::Stmt)],
        (Role::Stmt, Symbol::Skip | Symbol::Call(_)) => &[slot(Edge::Sibling, A::StmtOrEnd, Role::Stmt)],
        (Role::Stmt, Symbol::While) => {
            &[slot(Edge::Child, A::CondStart, Role::Cond), slot(Edge::Sibling, A::StmtOrEnd, Role::Stmt)]
        }
        (Role::Stmt, Symbol::If) => {
            &[slot(Edge::Child, A::CondStart, Role::Cond), slot(Edge::Sibling, A::Else, Role::Stmt)]
        }
        (Role::Stmt, Symbol::Else) => {
            &[slot(Edge::Child, A::Stmt, Role::Stmt), slot(Edge::Sibling, A::StmtOrEnd, Role::Stmt)]
        }
        (Role::Stmt, Symbol::Try) => {
            &[slot(Edge::Child, A::Stmt, Role::Stmt), slot(Edge::Sibling, A::StmtCatchOrEnd, Role::Stmt)]
        }
        (Role::Stmt, Symbol::Catch) => {
            &[slot(Edge::Child, A::Exception, Role::Exception), slot(Edge::Sibling, A::StmtCatchOrEnd, Role::Stmt)]
        }
        (Role::Cond, Symbol::NoCond) => &[slot(Edge::Child, A::Stmt, Role::Stmt)],
        (Role::Cond, Symbol::Call(_)) => {
            return match visited {
                [] => Some(slot(Edge::Sibling, A::CondOrEnd, Role::Cond)),
                [(_, false)] => Some(slot(Edge::Child, A::Stmt, Role::Stmt)),
                _ => None,
            };
        }
        (Role::Exception, Symbol::Exception(_)) => &[slot(Edge::Child, A::Stmt, Role::Stmt)],
        _ => &[],
    };
    plan.get(visited.len()).copied()
}

/// Lowers a sketch to its decoder tree, rooted at `root`.
pub fn to_tree(y: &Sketch) -> TreeNode {
    TreeNode { symbol: Symbol::Root, child: Some(Box::new(list(&y.stmts, None))), sibling: None }
}

fn list(stmts: &[SketchStmt], tail: Option<Box<TreeNode>>) -> TreeNode {
    let mut next = tail;
    for s in stmts.iter().rev() {
        next = Some(Box::new(stmt(s, next)));
    }
    *next.expect("statement lists are non-empty")
}

fn cond(c: &Cseq, body: &Sketch) -> TreeNode {
    let body = Some(Box::new(list(&body.stmts, None)));
    if c.is_empty() {
        return TreeNode { symbol: Symbol::NoCond, child: body, sibling: None };
    }
    let mut next = None;
    let mut body = body;
    for e in c.iter().rev() {
        next = Some(Box::new(TreeNode { symbol: Symbol::Call(e.clone()), child: body.take(), sibling: next }));
    }
    *next.unwrap()
}

fn stmt(s: &SketchStmt, next: Option<Box<TreeNode>>) -> TreeNode {
    match s {
        SketchStmt::Skip => TreeNode { symbol: Symbol::Skip, child: None, sibling: next },
        SketchStmt::Call(c) => TreeNode { symbol: Symbol::Call(c.clone()), child: None, sibling: next },
        SketchStmt::While(c, b) => TreeNode { symbol: Symbol::While, child: Some(Box::new(cond(c, b))), sibling: next },
        SketchStmt::If(c, a, b) => {
            let els = TreeNode { symbol: Symbol::Else, child: Some(Box::new(list(&b.stmts, None))), sibling: next };
            TreeNode { symbol: Symbol::If, child: Some(Box::new(cond(c, a))), sibling: Some(Box::new(els)) }
        }
        SketchStmt::Try(b, catches) => {
            let mut chain = next;
            for (ty, body) in catches.iter().rev() {
                let handler = TreeNode {
                    symbol: Symbol::Exception(ty.clone()),
                    child: Some(Box::new(list(&body.stmts, None))),
                    sibling: None,
                };
                chain =
                    Some(Box::new(TreeNode { symbol: Symbol::Catch, child: Some(Box::new(handler)), sibling: chain }));
            }
            TreeNode { symbol: Symbol::Try, child: Some(Box::new(list(&b.stmts, None))), sibling: chain }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("unexpected `{found}` where {expected} was expected")]
    Unexpected { found: String, expected: &'static str },
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("production paths disagree at `{0}`")]
    Inconsistent(String),
    #[error("no production paths")]
    Empty,
}

fn unexpected<T>(n: &TreeNode, expected: &'static str) -> Result<T, TreeError> {
    Err(TreeError::Unexpected { found: n.symbol.to_string(), expected })
}

/// Raises a decoder tree back to a sketch; the inverse of [`to_tree`].
pub fn from_tree(root: &TreeNode) -> Result<Sketch, TreeError> {
    if root.symbol != Symbol::Root {
        return unexpected(root, "root");
    }
    if root.sibling.is_some() {
        return Err(TreeError::Unexpected { found: "sibling of root".into(), expected: "nothing" });
    }
    read_list(root.child.as_deref())
}

fn no_child(n: &TreeNode) -> Result<(), TreeError> {
    match &n.child {
        Some(c) => unexpected(c, "no child"),
        None => Ok(()),
    }
}

fn read_list(first: Option<&TreeNode>) -> Result<Sketch, TreeError> {
    let mut cur = Some(first.ok_or(TreeError::Missing("statement"))?);
    let mut stmts = Vec::new();
    while let Some(n) = cur {
        cur = n.sibling.as_deref();
        match &n.symbol {
            Symbol::Skip => {
                no_child(n)?;
                stmts.push(SketchStmt::Skip);
            }
            Symbol::Call(c) => {
                no_child(n)?;
                stmts.push(SketchStmt::Call(c.clone()));
            }
            Symbol::While => {
                let (c, body) = read_cond(n.child.as_deref())?;
                stmts.push(SketchStmt::While(c, body));
            }
            Symbol::If => {
                let (c, then) = read_cond(n.child.as_deref())?;
                let els = cur.ok_or(TreeError::Missing("else"))?;
                if els.symbol != Symbol::Else {
                    return unexpected(els, "else");
                }
                let otherwise = read_list(els.child.as_deref())?;
                cur = els.sibling.as_deref();
                stmts.push(SketchStmt::If(c, then, otherwise));
            }
            Symbol::Try => {
                let body = read_list(n.child.as_deref())?;
                let mut catches = Vec::new();
                while let Some(c) = cur.filter(|c| c.symbol == Symbol::Catch) {
                    let handler = c.child.as_deref().ok_or(TreeError::Missing("exception type"))?;
                    let Symbol::Exception(ty) = &handler.symbol else {
                        return unexpected(handler, "exception type");
                    };
                    if let Some(s) = &handler.sibling {
                        return unexpected(s, "nothing after an exception type");
                    }
                    catches.push((ty.clone(), read_list(handler.child.as_deref())?));
                    cur = c.sibling.as_deref();
                }
                stmts.push(SketchStmt::Try(body, catches));
            }
            _ => return unexpected(n, "a statement"),
        }
    }
    Ok(Sketch { stmts })
}

fn read_cond(first: Option<&TreeNode>) -> Result<(Cseq, Sketch), TreeError> {
    let first = first.ok_or(TreeError::Missing("condition"))?;
    if first.symbol == Symbol::NoCond {
        if let Some(s) = &first.sibling {
            return unexpected(s, "nothing after <nocond>");
        }
        return Ok((Vec::new(), read_list(first.child.as_deref())?));
    }
    let mut calls = Vec::new();
    let mut cur = first;
    loop {
        let Symbol::Call(c) = &cur.symbol else {
            return unexpected(cur, "a condition call");
        };
        calls.push(c.clone());
        match (&cur.sibling, &cur.child) {
            (Some(next), None) => cur = next,
            (None, Some(_)) => return Ok((calls, read_list(cur.child.as_deref())?)),
            (Some(_), Some(_)) => return unexpected(cur, "a condition call with either a successor or a body"),
            (None, None) => return Err(TreeError::Missing("condition body")),
        }
    }
}

/// Depth-first enumeration of the root-to-leaf paths of the decoder tree,
/// child edges before sibling edges.
pub fn production_paths(y: &Sketch) -> Vec<ProductionPath> {
    fn go(n: &TreeNode, prefix: &mut Vec<(Symbol, Option<Edge>)>, out: &mut Vec<ProductionPath>) {
        if n.child.is_none() && n.sibling.is_none() {
            let mut p = prefix.clone();
            p.push((n.symbol.clone(), None));
            out.push(ProductionPath(p));
            return;
        }
        for edge in [Edge::Child, Edge::Sibling] {
            if let Some(next) = n.get(edge) {
                prefix.push((n.symbol.clone(), Some(edge)));
                go(next, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(&to_tree(y), &mut Vec::new(), &mut out);
    out
}

/// Merges production paths back into the tree they were read from.
pub fn tree_from_paths(paths: &[ProductionPath]) -> Result<TreeNode, TreeError> {
    let first = paths.first().and_then(|p| p.0.first()).ok_or(TreeError::Empty)?;
    let mut root = TreeNode::leaf(first.0.clone());
    for path in paths {
        let mut node = &mut root;
        let mut steps = path.0.iter().peekable();
        let (sym, _) = steps.next().ok_or(TreeError::Empty)?;
        if *sym != node.symbol {
            return Err(TreeError::Inconsistent(sym.to_string()));
        }
        let mut edge = path.0[0].1;
        for (sym, next_edge) in steps {
            let e = edge.ok_or_else(|| TreeError::Inconsistent(sym.to_string()))?;
            let slot = match e {
                Edge::Child => &mut node.child,
                Edge::Sibling => &mut node.sibling,
            };
            let next = slot.get_or_insert_with(|| Box::new(TreeNode::leaf(sym.clone())));
            if next.symbol != *sym {
                return Err(TreeError::Inconsistent(sym.to_string()));
            }
            node = next;
            edge = *next_edge;
        }
    }
    Ok(root)
}

/// Reassembles a sketch from its production paths.
pub fn sketch_from_paths(paths: &[ProductionPath]) -> Result<Sketch, TreeError> {
    from_tree(&tree_from_paths(paths)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn readline_sketch() -> Sketch {
        let call = |r: &str, m: &str, p: &[&str]| SketchStmt::Call(Cexp::new(r, m, p));
        let print = Sketch::new(vec![call("Throwable", "printStackTrace", &[])]);
        Sketch::new(vec![SketchStmt::Try(
            Sketch::new(vec![
                call("FileReader", "new", &["String"]),
                call("BufferedReader", "new", &["FileReader"]),
                SketchStmt::While(vec![Cexp::new("BufferedReader", "readLine", &[])], Sketch::skip()),
                call("BufferedReader", "close", &[]),
            ]),
            vec![("FileNotFoundException".into(), print.clone()), ("IOException".into(), print)],
        )])
    }

    #[test]
    fn readline_sketch_has_four_paths() {
        let paths: Vec<String> = production_paths(&readline_sketch()).iter().map(|p| p.to_string()).collect();
        assert_eq!(
            paths,
            vec![
                "(root,c),(try,c),(FileReader.new(String),s),(BufferedReader.new(FileReader),s),(while,c),(BufferedReader.readLine(),c),(skip,·)",
                "(root,c),(try,c),(FileReader.new(String),s),(BufferedReader.new(FileReader),s),(while,s),(BufferedReader.close(),·)",
                "(root,c),(try,s),(catch,c),(FileNotFoundException,c),(Throwable.printStackTrace(),·)",
                "(root,c),(try,s),(catch,s),(catch,c),(IOException,c),(Throwable.printStackTrace(),·)",
            ]
        );
    }

    #[test]
    fn skip_has_one_path() {
        let paths = production_paths(&Sketch::skip());
        assert_eq!(paths, vec![ProductionPath(vec![(Symbol::Root, Some(Edge::Child)), (Symbol::Skip, None)])]);
    }

    #[test]
    fn paths_reassemble() {
        let y = readline_sketch();
        assert_eq!(sketch_from_paths(&production_paths(&y)).unwrap(), y);
    }

    #[test]
    fn if_and_empty_condition() {
        let y = Sketch::new(vec![
            SketchStmt::If(vec![], Sketch::skip(), Sketch::new(vec![SketchStmt::Call(Cexp::new("A", "m", &[]))])),
            SketchStmt::Try(Sketch::skip(), vec![]),
            SketchStmt::While(vec![Cexp::new("A", "m", &[]), Cexp::new("A", "n", &["A"])], Sketch::skip()),
        ]);
        let t = to_tree(&y);
        assert_eq!(from_tree(&t).unwrap(), y);
        assert_eq!(sketch_from_paths(&production_paths(&y)).unwrap(), y);
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let mut t = to_tree(&Sketch::skip());
        t.child.as_mut().unwrap().symbol = Symbol::Else;
        assert!(from_tree(&t).is_err());
        let t = TreeNode { symbol: Symbol::Root, child: Some(Box::new(TreeNode::leaf(Symbol::If))), sibling: None };
        assert!(from_tree(&t).is_err());
    }

    #[test]
    fn slots_follow_the_layout() {
        let s = next_slot(&Symbol::If, Role::Stmt, &[]).unwrap();
        assert_eq!((s.edge, s.allowed), (Edge::Child, Allowed::CondStart));
        let s2 = next_slot(&Symbol::If, Role::Stmt, &[(s, true)]).unwrap();
        assert_eq!(s2.allowed, Allowed::Else);
        let c = Symbol::Call(Cexp::new("A", "m", &[]));
        let sib = next_slot(&c, Role::Cond, &[]).unwrap();
        assert_eq!(sib.edge, Edge::Sibling);
        assert!(next_slot(&c, Role::Cond, &[(sib, true)]).is_none());
        assert_eq!(next_slot(&c, Role::Cond, &[(sib, false)]).unwrap().edge, Edge::Child);
        assert!(next_slot(&Symbol::Skip, Role::Stmt, &[(sib, false)]).is_none());
    }
}
