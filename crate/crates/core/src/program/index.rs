use super::{Action, Edge, NodeId, ProtoId, Program};

/// Flat, program-wide edge identifier (prototypes in order, edges in order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EdgeRef {
    pub id: EdgeId,
    pub proto: ProtoId,
    pub edge: Edge,
}

/// Adjacency lookups over a program's CFGs.
#[derive(Debug, Clone)]
pub struct CfgIndex {
    edges: Vec<EdgeRef>,
    outgoing: Vec<Vec<EdgeId>>,
    incoming: Vec<Vec<EdgeId>>,
    node_proto: Vec<Option<ProtoId>>,
}

impl CfgIndex {
    pub fn new(program: &Program) -> Self {
        let n = program.node_count();
        let mut edges = Vec::new();
        let mut outgoing = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        let mut node_proto = vec![None; n];
        for (p, proto) in program.prototypes.iter().enumerate() {
            let pid = ProtoId(p as u32);
            node_proto[proto.start.index()] = Some(pid);
            for e in &proto.edges {
                let id = EdgeId(edges.len() as u32);
                edges.push(EdgeRef {
                    id,
                    proto: pid,
                    edge: *e,
                });
                outgoing[e.source.index()].push(id);
                incoming[e.target.index()].push(id);
                node_proto[e.source.index()] = Some(pid);
                node_proto[e.target.index()] = Some(pid);
            }
        }
        CfgIndex {
            edges,
            outgoing,
            incoming,
            node_proto,
        }
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()].edge
    }

    pub fn edge_ref(&self, id: EdgeId) -> &EdgeRef {
        &self.edges[id.index()]
    }

    pub fn action(&self, id: EdgeId) -> &Action {
        &self.edges[id.index()].edge.action
    }

    pub fn edges(&self) -> &[EdgeRef] {
        &self.edges
    }

    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        self.outgoing.get(node.index()).map_or(&[], Vec::as_slice)
    }

    pub fn incoming(&self, node: NodeId) -> &[EdgeId] {
        self.incoming.get(node.index()).map_or(&[], Vec::as_slice)
    }

    pub fn proto_of(&self, node: NodeId) -> Option<ProtoId> {
        self.node_proto.get(node.index()).copied().flatten()
    }

    pub fn node_count(&self) -> usize {
        self.outgoing.len()
    }
}
