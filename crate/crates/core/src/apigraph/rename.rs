use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::listing::{method_signature, split_signature, MethodListing, Target};
use crate::error::{Error, Result};

/// Renaming of app-local identifiers. Unlisted names stay as they are.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Renaming {
    /// Old class descriptor → new class descriptor.
    pub classes: BTreeMap<String, String>,
    /// (old class descriptor, old method name) → new method name.
    pub methods: BTreeMap<(String, String), String>,
}

impl Renaming {
    fn class(&self, c: &str) -> String {
        self.classes.get(c).cloned().unwrap_or_else(|| c.to_owned())
    }

    fn method(&self, c: &str, m: &str) -> String {
        self.methods
            .get(&(c.to_owned(), m.to_owned()))
            .cloned()
            .unwrap_or_else(|| m.to_owned())
    }

    fn signature(&self, c: &str, m: &str) -> String {
        method_signature(&self.class(c), &self.method(c, m))
    }

    /// Inverse mapping; fails when the renaming is not injective.
    pub fn inverse(&self) -> Result<Renaming> {
        let mut inv = Renaming::default();
        for (old, new) in &self.classes {
            if inv.classes.insert(new.clone(), old.clone()).is_some() {
                return Err(Error::usage(format!("class renaming is not injective at {new}")));
            }
        }
        for ((class, old), new) in &self.methods {
            let key = (self.class(class), new.clone());
            if inv.methods.insert(key, old.clone()).is_some() {
                return Err(Error::usage(format!("method renaming is not injective at {new}")));
            }
        }
        Ok(inv)
    }
}

/// Rewrites local class and method names consistently across headers and
/// call targets. API signatures are left untouched.
pub fn rename_identifiers(listings: &[MethodListing], renaming: &Renaming) -> Result<Vec<MethodListing>> {
    let api_classes: BTreeSet<&str> = listings
        .iter()
        .flat_map(|m| &m.rows)
        .filter_map(|r| match &r.target {
            Target::Api(s) => split_signature(s).map(|(c, _)| c),
            _ => None,
        })
        .collect();
    for new in renaming.classes.values() {
        if !new.starts_with('L') || !new.ends_with(';') || new.len() < 3 {
            return Err(Error::usage(format!("renamed class {new:?} is not a type descriptor")));
        }
        if api_classes.contains(new.as_str()) {
            return Err(Error::usage(format!("renamed class {new} collides with an API class")));
        }
    }
    for new in renaming.methods.values() {
        if new.is_empty() || new.contains(char::is_whitespace) || new.contains("->") {
            return Err(Error::usage(format!("invalid method name {new:?}")));
        }
    }

    let mut new_sigs = HashSet::new();
    for m in listings {
        if !new_sigs.insert(renaming.signature(&m.class_name, &m.method_name)) {
            return Err(Error::usage(format!(
                "renaming maps two methods onto {}",
                renaming.signature(&m.class_name, &m.method_name)
            )));
        }
    }
    for m in listings {
        for r in &m.rows {
            if let Target::Api(s) = &r.target {
                if new_sigs.contains(s) {
                    return Err(Error::usage(format!("renamed method collides with API {s}")));
                }
            }
        }
    }

    listings
        .iter()
        .map(|m| {
            let rows = m
                .rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    if let Target::Local(sig) = &r.target {
                        let (c, name) = split_signature(sig)
                            .ok_or_else(|| Error::data(format!("bad local target {sig}")))?;
                        r.target = Target::Local(renaming.signature(c, name));
                    }
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MethodListing {
                class_name: renaming.class(&m.class_name),
                method_name: renaming.method(&m.class_name, &m.method_name),
                rows,
            })
        })
        .collect()
}
