use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Atom, Iri, OntologyError, SwrlRule, Term};

/// Optional domain and range of an object property.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyDecl {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Iri>,
}

/// Terminological box: classes, object properties, subclass and
/// disjointness axioms, and rules.
///
/// Every mutator validates before it changes anything, so a failed call
/// leaves the TBox as it was.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TBox {
    classes: BTreeSet<Iri>,
    properties: BTreeMap<Iri, PropertyDecl>,
    subclass_axioms: Vec<(Iri, Iri)>,
    disjoint_axioms: Vec<(Iri, Iri)>,
    rules: Vec<SwrlRule>,
}

impl TBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn classes(&self) -> &BTreeSet<Iri> {
        &self.classes
    }

    pub fn properties(&self) -> &BTreeMap<Iri, PropertyDecl> {
        &self.properties
    }

    pub fn subclass_axioms(&self) -> &[(Iri, Iri)] {
        &self.subclass_axioms
    }

    /// Disjointness pairs, each stored with the smaller IRI first.
    pub fn disjoint_axioms(&self) -> &[(Iri, Iri)] {
        &self.disjoint_axioms
    }

    pub fn rules(&self) -> &[SwrlRule] {
        &self.rules
    }

    pub fn has_class(&self, iri: &Iri) -> bool {
        self.classes.contains(iri)
    }

    pub fn has_property(&self, iri: &Iri) -> bool {
        self.properties.contains_key(iri)
    }

    pub fn property(&self, iri: &Iri) -> Option<&PropertyDecl> {
        self.properties.get(iri)
    }

    /// Registers a class. Returns `false` if it was already declared.
    pub fn declare_class(&mut self, iri: Iri) -> Result<bool, OntologyError> {
        if self.properties.contains_key(&iri) {
            return Err(OntologyError::ConflictingDeclaration(iri));
        }
        Ok(self.classes.insert(iri))
    }

    /// Registers an object property. Re-declaring with the same domain and
    /// range is a no-op; a different signature is an error.
    pub fn declare_property(
        &mut self,
        iri: Iri,
        domain: Option<Iri>,
        range: Option<Iri>,
    ) -> Result<bool, OntologyError> {
        if self.classes.contains(&iri) {
            return Err(OntologyError::ConflictingDeclaration(iri));
        }
        for class in domain.iter().chain(range.iter()) {
            self.require_class(class)?;
        }
        let decl = PropertyDecl { domain, range };
        match self.properties.get(&iri) {
            Some(existing) if *existing == decl => Ok(false),
            Some(_) => Err(OntologyError::ConflictingDeclaration(iri)),
            None => {
                self.properties.insert(iri, decl);
                Ok(true)
            }
        }
    }

    pub fn add_subclass(&mut self, sub: Iri, sup: Iri) -> Result<(), OntologyError> {
        self.require_class(&sub)?;
        self.require_class(&sup)?;
        if sub == sup {
            return Err(OntologyError::SubclassCycle { sub, sup });
        }
        if self.subclass_axioms.contains(&(sub.clone(), sup.clone())) {
            return Ok(());
        }
        if self.superclasses(&sup).contains(&sub) {
            return Err(OntologyError::SubclassCycle { sub, sup });
        }
        self.subclass_axioms.push((sub, sup));
        if let Err(e) = self.check_disjoint_hierarchy() {
            self.subclass_axioms.pop();
            return Err(e);
        }
        Ok(())
    }

    pub fn add_disjoint(&mut self, a: Iri, b: Iri) -> Result<(), OntologyError> {
        self.require_class(&a)?;
        self.require_class(&b)?;
        if a == b {
            return Err(OntologyError::SelfDisjoint(a));
        }
        let pair = if a <= b { (a, b) } else { (b, a) };
        if self.disjoint_axioms.contains(&pair) {
            return Ok(());
        }
        Self::check_disjoint_pair(&self.superclasses(&pair.0), &self.superclasses(&pair.1), &pair)?;
        self.disjoint_axioms.push(pair);
        Ok(())
    }

    pub fn add_rule(&mut self, rule: SwrlRule) -> Result<(), OntologyError> {
        rule.check_shape()?;
        if self.rules.iter().any(|r| r.name == rule.name) {
            return Err(OntologyError::InvalidRule {
                rule: rule.name,
                reason: "duplicate rule name".into(),
            });
        }
        for atom in rule.antecedent.iter().chain(std::iter::once(&rule.consequent)) {
            match atom {
                Atom::Class { class, .. } => self.require_class(class)?,
                Atom::Property { property, .. } => self.require_property(property)?,
            }
        }
        self.rules.push(rule);
        Ok(())
    }

    /// Reflexive-transitive superclasses of `class`.
    pub fn superclasses(&self, class: &Iri) -> BTreeSet<Iri> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![class.clone()];
        while let Some(c) = stack.pop() {
            if seen.insert(c.clone()) {
                stack.extend(
                    self.subclass_axioms
                        .iter()
                        .filter(|(sub, _)| *sub == c)
                        .map(|(_, sup)| sup.clone()),
                );
            }
        }
        seen
    }

    /// Re-checks every invariant. Used after bulk construction.
    pub fn validate(&self) -> Result<(), OntologyError> {
        let mut rebuilt = TBox::new();
        for class in &self.classes {
            rebuilt.declare_class(class.clone())?;
        }
        for (iri, decl) in &self.properties {
            rebuilt.declare_property(iri.clone(), decl.domain.clone(), decl.range.clone())?;
        }
        for (sub, sup) in &self.subclass_axioms {
            rebuilt.add_subclass(sub.clone(), sup.clone())?;
        }
        for (a, b) in &self.disjoint_axioms {
            rebuilt.add_disjoint(a.clone(), b.clone())?;
        }
        for rule in &self.rules {
            rebuilt.add_rule(rule.clone())?;
        }
        Ok(())
    }

    /// Individual constants mentioned in rules.
    pub fn rule_constants(&self) -> BTreeSet<&Iri> {
        self.rules
            .iter()
            .flat_map(|r| r.antecedent.iter().chain(std::iter::once(&r.consequent)))
            .flat_map(Atom::terms)
            .filter_map(|t| match t {
                Term::Individual(iri) => Some(iri),
                Term::Variable(_) => None,
            })
            .collect()
    }

    fn require_class(&self, iri: &Iri) -> Result<(), OntologyError> {
        if self.classes.contains(iri) {
            Ok(())
        } else {
            Err(OntologyError::Undeclared {
                kind: "class",
                iri: iri.clone(),
            })
        }
    }

    fn require_property(&self, iri: &Iri) -> Result<(), OntologyError> {
        if self.properties.contains_key(iri) {
            Ok(())
        } else {
            Err(OntologyError::Undeclared {
                kind: "property",
                iri: iri.clone(),
            })
        }
    }

    fn check_disjoint_pair(
        supers_a: &BTreeSet<Iri>,
        supers_b: &BTreeSet<Iri>,
        (a, b): &(Iri, Iri),
    ) -> Result<(), OntologyError> {
        if supers_a.contains(b) {
            return Err(OntologyError::DisjointWithAncestor {
                class: a.clone(),
                ancestor: b.clone(),
            });
        }
        if supers_b.contains(a) {
            return Err(OntologyError::DisjointWithAncestor {
                class: b.clone(),
                ancestor: a.clone(),
            });
        }
        Ok(())
    }

    fn check_disjoint_hierarchy(&self) -> Result<(), OntologyError> {
        for pair in &self.disjoint_axioms {
            Self::check_disjoint_pair(&self.superclasses(&pair.0), &self.superclasses(&pair.1), pair)?;
        }
        Ok(())
    }
}
