use std::collections::HashMap;
use std::sync::Arc;

use crate::autodiff::Visibility;

/// A trie of token sequences. Sequences sharing a prefix share nodes, and a
/// node's hidden state depends only on its root path, so one causal forward
/// pass over the tree evaluates every inserted sequence at once.
#[derive(Debug, Clone, Default)]
pub struct TokenTree {
    tokens: Vec<u32>,
    parents: Vec<Option<usize>>,
    depths: Vec<usize>,
    index: HashMap<(usize, u32), usize>,
}

const ROOT: usize = usize::MAX;

impl TokenTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// Position of each node (its depth below the root).
    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parents[node]
    }

    /// Child of `parent` (or a root when `None`) carrying `token`, created on
    /// first use.
    pub fn child(&mut self, parent: Option<usize>, token: u32) -> usize {
        let key = (parent.unwrap_or(ROOT), token);
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token);
        self.parents.push(parent);
        self.depths.push(parent.map_or(0, |p| self.depths[p] + 1));
        self.index.insert(key, id);
        id
    }

    /// Inserts a sequence below `parent`; returns the last node (or `parent`
    /// for an empty sequence).
    pub fn extend(&mut self, parent: Option<usize>, tokens: &[u32]) -> Option<usize> {
        tokens.iter().fold(parent, |p, &t| Some(self.child(p, t)))
    }

    pub fn insert(&mut self, tokens: &[u32]) -> Option<usize> {
        self.extend(None, tokens)
    }

    /// Per-node attention lists: root path plus the node itself, root first.
    pub fn visibility(&self) -> Arc<Visibility> {
        let mut visible: Vec<Vec<u32>> = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let mut list = match self.parents[i] {
                Some(p) => visible[p].clone(),
                None => Vec::new(),
            };
            list.push(i as u32);
            visible.push(list);
        }
        Arc::new(Visibility { visible })
    }
}
