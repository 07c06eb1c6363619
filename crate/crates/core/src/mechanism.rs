//! Static reaction-network model: species, reactions and the net
//! stoichiometric matrix.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub name: String,
    pub index: usize,
}

/// One irreversible reaction with a mass-action rate constant.
///
/// Reactant coefficients double as reaction orders in the rate law, so they
/// are kept even when a species cancels in the net stoichiometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub id: usize,
    pub reactants: BTreeMap<usize, u32>,
    pub products: BTreeMap<usize, u32>,
    pub rate_constant: f64,
    /// Zero-order source (`0 -> X`); the only reactions allowed without reactants.
    pub source: bool,
}

impl Reaction {
    pub fn new(id: usize, reactants: BTreeMap<usize, u32>, products: BTreeMap<usize, u32>, rate_constant: f64) -> Self {
        let source = reactants.is_empty();
        Self { id, reactants, products, rate_constant, source }
    }

    /// Net change of species `s` per firing.
    pub fn net(&self, s: usize) -> i64 {
        let p = self.products.get(&s).copied().unwrap_or(0) as i64;
        let r = self.reactants.get(&s).copied().unwrap_or(0) as i64;
        p - r
    }
}

/// Integer net stoichiometry, `n_species x n_reactions`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoichMatrix {
    n_species: usize,
    n_reactions: usize,
    data: Vec<i64>,
}

impl StoichMatrix {
    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_reactions(&self) -> usize {
        self.n_reactions
    }

    #[inline]
    pub fn get(&self, species: usize, reaction: usize) -> i64 {
        self.data[species * self.n_reactions + reaction]
    }

    pub fn column(&self, reaction: usize) -> Vec<i64> {
        (0..self.n_species).map(|s| self.get(s, reaction)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.n_species).map(|s| self.data[s * self.n_reactions..(s + 1) * self.n_reactions].to_vec()).collect()
    }
}

/// Builds the net stoichiometric matrix; columns follow reaction order.
pub fn build_stoichiometric_matrix(n_species: usize, reactions: &[Reaction]) -> StoichMatrix {
    let n_reactions = reactions.len();
    let mut data = vec![0i64; n_species * n_reactions];
    for (i, rxn) in reactions.iter().enumerate() {
        for (&s, &c) in &rxn.reactants {
            data[s * n_reactions + i] -= c as i64;
        }
        for (&s, &c) in &rxn.products {
            data[s * n_reactions + i] += c as i64;
        }
    }
    StoichMatrix { n_species, n_reactions, data }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    stoich: StoichMatrix,
}

impl Mechanism {
    /// Validates and assembles a mechanism. Reaction ids are reassigned to
    /// their position in `reactions`.
    pub fn new(species_names: Vec<String>, mut reactions: Vec<Reaction>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for name in &species_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidMechanism(format!("duplicate species name `{name}`")));
            }
        }
        let n_species = species_names.len();
        for (i, rxn) in reactions.iter_mut().enumerate() {
            rxn.id = i;
            if !(rxn.rate_constant.is_finite() && rxn.rate_constant > 0.0) {
                return Err(Error::InvalidMechanism(format!(
                    "reaction {i}: rate constant must be positive and finite, got {}",
                    rxn.rate_constant
                )));
            }
            if rxn.reactants.is_empty() && !rxn.source {
                return Err(Error::InvalidMechanism(format!(
                    "reaction {i} has no reactants and is not flagged as a source"
                )));
            }
            if !rxn.reactants.is_empty() && rxn.source {
                return Err(Error::InvalidMechanism(format!("reaction {i} is flagged as a source but has reactants")));
            }
            for (&s, &c) in rxn.reactants.iter().chain(rxn.products.iter()) {
                if s >= n_species {
                    return Err(Error::InvalidMechanism(format!(
                        "reaction {i} references species index {s} (only {n_species} species)"
                    )));
                }
                if c == 0 {
                    return Err(Error::InvalidMechanism(format!(
                        "reaction {i}: stoichiometric coefficients must be positive"
                    )));
                }
            }
        }
        let species = species_names.into_iter().enumerate().map(|(index, name)| Species { name, index }).collect();
        let stoich = build_stoichiometric_matrix(n_species, &reactions);
        Ok(Self { species, reactions, stoich })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn stoich(&self) -> &StoichMatrix {
        &self.stoich
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    /// Keeps only the reactions in `support`, preserving their order.
    pub fn restrict(&self, support: &[usize]) -> Result<Restriction> {
        let n = self.n_reactions();
        let mut keep = vec![false; n];
        for &id in support {
            if id >= n {
                return Err(Error::ReactionOutOfRange { id, n_reactions: n });
            }
            keep[id] = true;
        }
        let mut old_to_new = vec![None; n];
        let mut new_to_old = Vec::new();
        let mut reactions = Vec::new();
        for (old, rxn) in self.reactions.iter().enumerate() {
            if keep[old] {
                old_to_new[old] = Some(new_to_old.len());
                new_to_old.push(old);
                reactions.push(rxn.clone());
            }
        }
        let names = self.species.iter().map(|s| s.name.clone()).collect();
        let mechanism = Mechanism::new(names, reactions)?;
        Ok(Restriction { mechanism, old_to_new, new_to_old })
    }
}

/// A reduced mechanism together with its reaction id mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub mechanism: Mechanism,
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn rxn(reactants: &[(usize, u32)], products: &[(usize, u32)], k: f64) -> Reaction {
        Reaction::new(0, reactants.iter().copied().collect(), products.iter().copied().collect(), k)
    }

    #[test]
    fn reversible_pair_matrix() {
        let m =
            Mechanism::new(names(&["A", "B"]), vec![rxn(&[(0, 1)], &[(1, 1)], 1.0), rxn(&[(1, 1)], &[(0, 1)], 1.0)])
                .unwrap();
        assert_eq!(m.stoich().rows(), vec![vec![-1, 1], vec![1, -1]]);
    }

    #[test]
    fn bimolecular_column() {
        let m = Mechanism::new(names(&["A", "B", "C"]), vec![rxn(&[(0, 1), (1, 1)], &[(2, 1)], 1.0)]).unwrap();
        assert_eq!(m.stoich().column(0), vec![-1, -1, 1]);
    }

    #[test]
    fn empty_reaction_list() {
        let m = Mechanism::new(names(&["A", "B"]), vec![]).unwrap();
        assert_eq!(m.stoich().n_species(), 2);
        assert_eq!(m.stoich().n_reactions(), 0);
    }

    #[test]
    fn third_body_cancels() {
        // 2 H + M_ -> H2 + M_
        let m =
            Mechanism::new(names(&["H", "H2", "M_"]), vec![rxn(&[(0, 2), (2, 1)], &[(1, 1), (2, 1)], 1.0)]).unwrap();
        assert_eq!(m.stoich().column(0), vec![-2, 1, 0]);
        // the third body still carries a reaction order
        assert_eq!(m.reactions()[0].reactants.get(&2), Some(&1));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Mechanism::new(names(&["A", "A"]), vec![]).is_err());
        assert!(Mechanism::new(names(&["A"]), vec![rxn(&[(0, 1)], &[], 0.0)]).is_err());
        assert!(Mechanism::new(names(&["A"]), vec![rxn(&[(0, 1)], &[(3, 1)], 1.0)]).is_err());
        let mut no_reactants = rxn(&[], &[(0, 1)], 1.0);
        no_reactants.source = false;
        assert!(Mechanism::new(names(&["A"]), vec![no_reactants]).is_err());
        assert!(Mechanism::new(names(&["A"]), vec![rxn(&[], &[(0, 1)], 1.0)]).is_ok());
    }

    #[test]
    fn restrict_keeps_selected_columns() {
        let m = Mechanism::new(
            names(&["A", "B", "C"]),
            vec![rxn(&[(0, 1)], &[(1, 1)], 1.0), rxn(&[(1, 1)], &[(2, 1)], 2.0), rxn(&[(2, 1)], &[(0, 1)], 3.0)],
        )
        .unwrap();
        let r = m.restrict(&[0, 2]).unwrap();
        assert_eq!(r.mechanism.n_reactions(), 2);
        assert_eq!(r.mechanism.stoich().column(0), m.stoich().column(0));
        assert_eq!(r.mechanism.stoich().column(1), m.stoich().column(2));
        assert_eq!(r.old_to_new, vec![Some(0), None, Some(1)]);
        assert_eq!(r.new_to_old, vec![0, 2]);

        let empty = m.restrict(&[]).unwrap();
        assert_eq!(empty.mechanism.n_reactions(), 0);
        assert_eq!(empty.mechanism.n_species(), 3);

        let all = m.restrict(&[0, 1, 2]).unwrap();
        assert_eq!(all.mechanism, m);
        let again = all.mechanism.restrict(&[0, 1, 2]).unwrap();
        assert_eq!(again.mechanism, all.mechanism);

        assert_eq!(m.restrict(&[3]), Err(Error::ReactionOutOfRange { id: 3, n_reactions: 3 }));
    }
}
