//! Node storage: a generational arena of fixed-capacity nodes.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable handle to a node. A handle goes stale once the node is freed, even
/// if the slot is later reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    index: u32,
    generation: u32,
}

impl NodeId {
    pub fn index(self) -> u32 {
        self.index
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}.{}", self.index, self.generation)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Links<V> {
    /// Data handles, parallel to the node's keys.
    Leaf(Vec<V>),
    /// Child links; always one more than the node's keys.
    Internal(Vec<NodeId>),
}

#[derive(Debug, Clone)]
pub(crate) struct Node<K, V> {
    pub weight: u8,
    pub parent: Option<NodeId>,
    pub keys: Vec<K>,
    pub links: Links<V>,
}

impl<K, V> Node<K, V> {
    pub fn leaf(keys: Vec<K>, values: Vec<V>) -> Self {
        Node {
            weight: 1,
            parent: None,
            keys,
            links: Links::Leaf(values),
        }
    }

    pub fn internal(weight: u8, keys: Vec<K>, children: Vec<NodeId>) -> Self {
        Node {
            weight,
            parent: None,
            keys,
            links: Links::Internal(children),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.links, Links::Leaf(_))
    }

    /// Number of keys for a leaf, number of child links for an internal node.
    pub fn degree(&self) -> usize {
        match &self.links {
            Links::Leaf(_) => self.keys.len(),
            Links::Internal(children) => children.len(),
        }
    }

    pub fn children(&self) -> &[NodeId] {
        match &self.links {
            Links::Leaf(_) => &[],
            Links::Internal(children) => children,
        }
    }

    pub fn children_mut(&mut self) -> &mut Vec<NodeId> {
        match &mut self.links {
            Links::Internal(children) => children,
            Links::Leaf(_) => panic!("children_mut on a leaf"),
        }
    }

    pub fn values(&self) -> &[V] {
        match &self.links {
            Links::Leaf(values) => values,
            Links::Internal(_) => &[],
        }
    }
}

struct Slot<K, V> {
    generation: u32,
    node: Option<Node<K, V>>,
}

pub(crate) struct Arena<K, V> {
    slots: Vec<Slot<K, V>>,
    free: Vec<u32>,
    live: usize,
}

impl<K, V> Arena<K, V> {
    pub fn new() -> Self {
        Arena {
            slots: Vec::new(),
            free: Vec::new(),
            live: 0,
        }
    }

    pub fn alloc(&mut self, node: Node<K, V>) -> NodeId {
        self.live += 1;
        if let Some(index) = self.free.pop() {
            let slot = &mut self.slots[index as usize];
            slot.node = Some(node);
            NodeId {
                index,
                generation: slot.generation,
            }
        } else {
            let index = u32::try_from(self.slots.len()).expect("arena exhausted");
            self.slots.push(Slot {
                generation: 0,
                node: Some(node),
            });
            NodeId { index, generation: 0 }
        }
    }

    pub fn free(&mut self, id: NodeId) -> Node<K, V> {
        let slot = &mut self.slots[id.index as usize];
        assert_eq!(slot.generation, id.generation, "free of stale node {id}");
        let node = slot.node.take().expect("double free");
        slot.generation = slot.generation.wrapping_add(1);
        self.free.push(id.index);
        self.live -= 1;
        node
    }

    pub fn get(&self, id: NodeId) -> Option<&Node<K, V>> {
        self.slots
            .get(id.index as usize)
            .filter(|s| s.generation == id.generation)
            .and_then(|s| s.node.as_ref())
    }

    pub fn get_mut(&mut self, id: NodeId) -> Option<&mut Node<K, V>> {
        self.slots
            .get_mut(id.index as usize)
            .filter(|s| s.generation == id.generation)
            .and_then(|s| s.node.as_mut())
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.get(id).is_some()
    }

    pub fn live(&self) -> usize {
        self.live
    }
}

impl<K, V> std::ops::Index<NodeId> for Arena<K, V> {
    type Output = Node<K, V>;

    fn index(&self, id: NodeId) -> &Node<K, V> {
        self.get(id).unwrap_or_else(|| panic!("stale node handle {id}"))
    }
}

impl<K, V> std::ops::IndexMut<NodeId> for Arena<K, V> {
    fn index_mut(&mut self, id: NodeId) -> &mut Node<K, V> {
        self.get_mut(id).unwrap_or_else(|| panic!("stale node handle {id}"))
    }
}

/// Read-only view of a node, for inspection and rendering.
pub struct NodeRef<'a, K, V> {
    pub(crate) id: NodeId,
    pub(crate) node: &'a Node<K, V>,
}

impl<'a, K, V> NodeRef<'a, K, V> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn weight(&self) -> u8 {
        self.node.weight
    }

    pub fn is_leaf(&self) -> bool {
        self.node.is_leaf()
    }

    pub fn degree(&self) -> usize {
        self.node.degree()
    }

    pub fn keys(&self) -> &'a [K] {
        &self.node.keys
    }

    pub fn children(&self) -> &'a [NodeId] {
        self.node.children()
    }

    pub fn values(&self) -> &'a [V] {
        self.node.values()
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.node.parent
    }
}
