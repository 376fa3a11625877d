//! Tarjan strongly connected components and the condensation source count.

/// Computes strongly connected components of a digraph given as out-edge
/// adjacency lists. Components are returned in reverse topological order
/// (every edge between distinct components points into an earlier-listed
/// component of the output).
pub fn tarjan_scc(out_edges: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = out_edges.len();
    let mut state = TarjanState {
        next_index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        index: vec![None; n],
        low: vec![0; n],
        components: Vec::new(),
    };
    for v in 0..n {
        if state.index[v].is_none() {
            strongconnect(v, out_edges, &mut state);
        }
    }
    state.components
}

struct TarjanState {
    next_index: usize,
    stack: Vec<usize>,
    on_stack: Vec<bool>,
    index: Vec<Option<usize>>,
    low: Vec<usize>,
    components: Vec<Vec<usize>>,
}

fn strongconnect(v: usize, out_edges: &[Vec<usize>], state: &mut TarjanState) {
    state.index[v] = Some(state.next_index);
    state.low[v] = state.next_index;
    state.next_index += 1;
    state.stack.push(v);
    state.on_stack[v] = true;

    for &w in &out_edges[v] {
        if state.index[w].is_none() {
            strongconnect(w, out_edges, state);
            state.low[v] = state.low[v].min(state.low[w]);
        } else if state.on_stack[w] {
            state.low[v] = state.low[v].min(state.index[w].unwrap());
        }
    }

    if state.low[v] == state.index[v].unwrap() {
        let mut component = Vec::new();
        loop {
            let w = state.stack.pop().unwrap();
            state.on_stack[w] = false;
            component.push(w);
            if w == v {
                break;
            }
        }
        component.sort_unstable();
        state.components.push(component);
    }
}

/// Returns, for each component, whether it has an incoming edge from another
/// component. A digraph contains a directed spanning tree exactly when one
/// component has no incoming edges (a unique source in the condensation).
pub fn source_components(out_edges: &[Vec<usize>], components: &[Vec<usize>]) -> Vec<bool> {
    let n = out_edges.len();
    let mut component_of = vec![0usize; n];
    for (c, members) in components.iter().enumerate() {
        for &v in members {
            component_of[v] = c;
        }
    }
    let mut has_incoming = vec![false; components.len()];
    for (v, targets) in out_edges.iter().enumerate() {
        for &w in targets {
            if component_of[v] != component_of[w] {
                has_incoming[component_of[w]] = true;
            }
        }
    }
    has_incoming.iter().map(|inc| !inc).collect()
}
