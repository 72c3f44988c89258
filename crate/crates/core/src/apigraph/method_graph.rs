use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::listing::{FlowKind, MethodListing, Target};
use super::vocab::ApiVocabulary;

/// A local-method invocation inside a method body, with its API adjacency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub offset: u32,
    /// Callee signature, `Lpkg/Cls;->name`.
    pub callee: String,
    /// APIs whose next event along some path is this call.
    pub preceding_apis: BTreeSet<u32>,
    /// First APIs reached after the call returns.
    pub following_apis: BTreeSet<u32>,
    /// Call sites (indices into `call_sites`) reached after this call with no
    /// API in between.
    pub following_calls: BTreeSet<usize>,
    /// A return is reachable after this call with no API in between.
    pub reaches_exit: bool,
}

/// API adjacency of a single method before merging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodGraph {
    pub class_name: String,
    pub method_name: String,
    pub api_nodes: BTreeSet<u32>,
    pub intra_edges: BTreeSet<(u32, u32)>,
    pub call_sites: Vec<CallSite>,
    pub entry_apis: BTreeSet<u32>,
    pub exit_apis: BTreeSet<u32>,
    /// Call sites reachable from the method start with no API before them.
    pub entry_calls: BTreeSet<usize>,
    /// The method can return without invoking any vocabulary API itself.
    pub passes_through: bool,
}

impl MethodGraph {
    pub fn signature(&self) -> String {
        super::listing::method_signature(&self.class_name, &self.method_name)
    }

    pub fn exit_calls(&self) -> impl Iterator<Item = usize> + '_ {
        self.call_sites
            .iter()
            .enumerate()
            .filter(|(_, c)| c.reaches_exit)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Api(u32),
    Call(usize),
    Plain,
}

#[derive(Default)]
struct Reach {
    apis: BTreeSet<u32>,
    calls: BTreeSet<usize>,
    returns: bool,
}

struct Cfg {
    events: Vec<Event>,
    succ: Vec<Vec<usize>>,
    /// Terminal rows (returns) plus falling off the end.
    terminal: Vec<bool>,
}

impl Cfg {
    /// `usize::MAX` in `succ` stands for falling off the end of the method.
    fn scan(&self, starts: &[usize]) -> Reach {
        let mut reach = Reach::default();
        let mut seen = vec![false; self.events.len()];
        let mut stack: Vec<usize> = starts.to_vec();
        while let Some(r) = stack.pop() {
            if r == usize::MAX {
                reach.returns = true;
                continue;
            }
            if std::mem::replace(&mut seen[r], true) {
                continue;
            }
            match self.events[r] {
                Event::Api(id) => {
                    reach.apis.insert(id);
                    continue;
                }
                Event::Call(c) => {
                    reach.calls.insert(c);
                }
                Event::Plain => {}
            }
            if self.terminal[r] {
                reach.returns = true;
            } else {
                stack.extend(self.succ[r].iter().copied());
            }
        }
        reach
    }
}

/// Builds the per-method API adjacency.
///
/// An edge joins an API call to the next vocabulary API reachable along any
/// control-flow path with no other vocabulary API in between. `if-*` rows
/// have the branch target and the fall-through as successors, `goto` only
/// its target, and `return*`/`throw` end the path. Local calls are recorded
/// as call sites and are transparent for adjacency. Non-vocabulary APIs are
/// ignored.
pub fn build_method_graph(listing: &MethodListing, vocab: &ApiVocabulary) -> MethodGraph {
    let rows = &listing.rows;
    let by_offset: HashMap<u32, usize> = rows.iter().enumerate().map(|(i, r)| (r.offset, i)).collect();
    let next_of = |i: usize| if i + 1 < rows.len() { i + 1 } else { usize::MAX };

    let mut call_sites = Vec::new();
    let mut events = Vec::with_capacity(rows.len());
    let mut succ = Vec::with_capacity(rows.len());
    let mut terminal = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let event = match &row.target {
            Target::Api(sig) => vocab.id(sig).map_or(Event::Plain, Event::Api),
            Target::Local(sig) => {
                call_sites.push(CallSite {
                    offset: row.offset,
                    callee: sig.clone(),
                    preceding_apis: BTreeSet::new(),
                    following_apis: BTreeSet::new(),
                    following_calls: BTreeSet::new(),
                    reaches_exit: false,
                });
                Event::Call(call_sites.len() - 1)
            }
            _ => Event::Plain,
        };
        events.push(event);
        // Branch targets were validated at parse time; a dangling one is
        // treated as leaving the method.
        let target_row = |t: u32| by_offset.get(&t).copied().unwrap_or(usize::MAX);
        let (s, term) = match row.flow() {
            FlowKind::Conditional(t) => (vec![target_row(t), next_of(i)], false),
            FlowKind::Goto(t) => (vec![target_row(t)], false),
            FlowKind::Return => (Vec::new(), true),
            FlowKind::Next => (vec![next_of(i)], false),
        };
        succ.push(s);
        terminal.push(term);
    }
    let cfg = Cfg {
        events,
        succ,
        terminal,
    };

    let mut api_nodes = BTreeSet::new();
    let mut intra_edges = BTreeSet::new();
    let mut exit_apis = BTreeSet::new();
    for (i, ev) in cfg.events.iter().enumerate() {
        match *ev {
            Event::Api(id) => {
                api_nodes.insert(id);
                let reach = cfg.scan(&cfg.succ[i]);
                intra_edges.extend(reach.apis.iter().map(|&to| (id, to)));
                for &c in &reach.calls {
                    call_sites[c].preceding_apis.insert(id);
                }
                if reach.returns {
                    exit_apis.insert(id);
                }
            }
            Event::Call(c) => {
                let reach = cfg.scan(&cfg.succ[i]);
                let site = &mut call_sites[c];
                site.following_apis = reach.apis;
                site.following_calls = reach.calls;
                site.reaches_exit = reach.returns;
            }
            Event::Plain => {}
        }
    }
    let start = if rows.is_empty() { Reach { returns: true, ..Reach::default() } } else { cfg.scan(&[0]) };

    MethodGraph {
        class_name: listing.class_name.clone(),
        method_name: listing.method_name.clone(),
        api_nodes,
        intra_edges,
        call_sites,
        entry_apis: start.apis,
        exit_apis,
        entry_calls: start.calls,
        passes_through: start.returns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apigraph::parse_listing;

    fn vocab() -> ApiVocabulary {
        ApiVocabulary::from_apis(["La;->a", "Lb;->b", "Lc;->c", "Ld;->d"])
    }

    fn graph(doc: &str) -> MethodGraph {
        let ms = parse_listing(doc).unwrap();
        build_method_graph(&ms[0], &vocab())
    }

    #[test]
    fn straight_line_chain() {
        let g = graph("== Lx;-->m ==\n0 invoke La;->a\n2 invoke Lb;->b\n4 invoke Lc;->c\n6 return-void\n");
        let (a, b, c) = (0, 1, 2);
        assert_eq!(g.intra_edges, BTreeSet::from([(a, b), (b, c)]));
        assert_eq!(g.entry_apis, BTreeSet::from([a]));
        assert_eq!(g.exit_apis, BTreeSet::from([c]));
        assert!(!g.passes_through);
    }

    #[test]
    fn conditional_has_two_successors_and_goto_one() {
        let g = graph(
            "== Lx;-->m ==\n0 invoke La;->a\n2 if-eqz [10]\n4 invoke Lb;->b\n6 goto [14]\n10 invoke Lc;->c\n14 invoke Ld;->d\n16 return-void\n",
        );
        assert_eq!(g.intra_edges, BTreeSet::from([(0, 1), (0, 2), (1, 3), (2, 3)]));
    }

    #[test]
    fn non_vocabulary_and_local_calls_are_transparent() {
        let doc = "== Lx;-->m ==\n0 invoke La;->a\n2 invoke Lzzz;->nope\n4 invoke Lx;->n\n6 invoke Lb;->b\n8 return-void\n\n== Lx;-->n ==\n0 return-void\n";
        let g = graph(doc);
        assert_eq!(g.intra_edges, BTreeSet::from([(0, 1)]));
        assert_eq!(g.call_sites.len(), 1);
        let site = &g.call_sites[0];
        assert_eq!(site.offset, 4);
        assert_eq!(site.preceding_apis, BTreeSet::from([0]));
        assert_eq!(site.following_apis, BTreeSet::from([1]));
    }

    #[test]
    fn no_vocabulary_apis_gives_empty_graph() {
        let g = graph("== Lx;-->m ==\n0 invoke Lq;->q\n2 return-void\n");
        assert!(g.api_nodes.is_empty() && g.intra_edges.is_empty());
        assert!(g.passes_through);
    }

    #[test]
    fn loops_produce_back_edges() {
        let g = graph("== Lx;-->m ==\n0 invoke La;->a\n2 invoke Lb;->b\n4 if-nez [0]\n6 return-void\n");
        assert_eq!(g.intra_edges, BTreeSet::from([(0, 1), (1, 0)]));
        assert_eq!(g.exit_apis, BTreeSet::from([1]));
    }
}
