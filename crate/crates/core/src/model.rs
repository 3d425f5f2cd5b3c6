//! Values, schemas, id-carrying tuples, instances and null change sets.
//!
//! Instances are never mutated in place. A virtual update is described by a
//! [`ChangeSet`] (the cells that become null) and materialized with
//! [`apply_changes`]; [`diff_changes`] recovers the change set from two
//! correlated instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::ModelError;

/// Tuple identifier. Ids are per relation and never change under updates.
pub type Tid = u32;

/// A domain constant. `Null` is the single SQL-style null shared by all
/// columns.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Null,
    Int(i64),
    Sym(String),
    Str(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn str(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Whether the value may be stored in a column of the given sort.
    pub fn fits(&self, sort: Sort) -> bool {
        match (self, sort) {
            (Value::Null, _) | (_, Sort::Any) => true,
            (Value::Int(_), Sort::Int) => true,
            (Value::Sym(_), Sort::Sym) => true,
            (Value::Str(_), Sort::Str) => true,
            _ => false,
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        if s == "null" {
            Value::Null
        } else {
            Value::Sym(s.to_owned())
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

/// Column sort. Order comparisons are only admitted on `Int` and `Any`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Int,
    Sym,
    Str,
    Any,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Int => "int",
            Sort::Sym => "sym",
            Sort::Str => "str",
            Sort::Any => "any",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "int" => Some(Sort::Int),
            "sym" => Some(Sort::Sym),
            "str" => Some(Sort::Str),
            "any" => Some(Sort::Any),
            _ => None,
        }
    }

    pub fn is_orderable(self) -> bool {
        matches!(self, Sort::Int | Sort::Any)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Column {
    pub name: String,
    pub sort: Sort,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationSchema {
    pub name: String,
    pub columns: Vec<Column>,
}

impl RelationSchema {
    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    /// Sort of the 1-based position `pos`.
    pub fn sort_at(&self, pos: usize) -> Option<Sort> {
        pos.checked_sub(1)
            .and_then(|i| self.columns.get(i))
            .map(|c| c.sort)
    }
}

/// A set of relation declarations, kept in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Schema {
    relations: Vec<RelationSchema>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, relation: RelationSchema) -> Result<(), ModelError> {
        if relation.columns.is_empty() {
            return Err(ModelError::ZeroArity(relation.name));
        }
        if self.get(&relation.name).is_some() {
            return Err(ModelError::DuplicateRelation(relation.name));
        }
        self.relations.push(relation);
        Ok(())
    }

    /// Convenience constructor for relations whose columns all share a sort.
    pub fn with(mut self, name: &str, arity: usize, sort: Sort) -> Result<Self, ModelError> {
        let columns = (1..=arity)
            .map(|i| Column {
                name: format!("c{i}"),
                sort,
            })
            .collect();
        self.add(RelationSchema {
            name: name.to_owned(),
            columns,
        })?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&RelationSchema> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn relations(&self) -> &[RelationSchema] {
        &self.relations
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rel in &self.relations {
            write!(f, "relation {}(", rel.name)?;
            for (i, c) in rel.columns.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}:{}", c.name, c.sort.name())?;
            }
            writeln!(f, ").")?;
        }
        Ok(())
    }
}

/// One row of a relation together with its identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple {
    pub tid: Tid,
    pub values: Vec<Value>,
}

/// Coordinates of one attribute value: relation, tuple id and 1-based
/// position. The derived order is the canonical (relation, tid, pos) order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub relation: String,
    pub tid: Tid,
    pub pos: usize,
}

impl Cell {
    pub fn new(relation: impl Into<String>, tid: Tid, pos: usize) -> Self {
        Cell {
            relation: relation.into(),
            tid,
            pos,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}.{}", self.relation, self.tid, self.pos)
    }
}

/// The set of cells replaced by null; identifies a candidate secrecy
/// instance relative to a base instance.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChangeSet {
    cells: BTreeSet<Cell>,
}

impl ChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cell: Cell) -> bool {
        self.cells.insert(cell)
    }

    pub fn contains(&self, cell: &Cell) -> bool {
        self.cells.contains(cell)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter()
    }

    pub fn is_subset(&self, other: &ChangeSet) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn union(&self, other: &ChangeSet) -> ChangeSet {
        ChangeSet {
            cells: self.cells.union(&other.cells).cloned().collect(),
        }
    }

    pub fn cells(&self) -> &BTreeSet<Cell> {
        &self.cells
    }
}

impl FromIterator<Cell> for ChangeSet {
    fn from_iter<I: IntoIterator<Item = Cell>>(iter: I) -> Self {
        ChangeSet {
            cells: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for ChangeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}[{}]#{}", c.relation, c.pos, c.tid)?;
        }
        f.write_str("}")
    }
}

/// A database instance: id-carrying tuples grouped by relation.
///
/// Every relation of the schema is present (possibly empty). Tuples are
/// kept ordered by tid, but no downstream semantics depends on that order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    schema: Arc<Schema>,
    relations: BTreeMap<String, BTreeMap<Tid, Vec<Value>>>,
}

impl Instance {
    pub fn empty(schema: Arc<Schema>) -> Self {
        let relations = schema
            .relations()
            .iter()
            .map(|r| (r.name.clone(), BTreeMap::new()))
            .collect();
        Instance { schema, relations }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Inserts a tuple, checking arity, column sorts and tid uniqueness.
    pub fn insert(
        &mut self,
        relation: &str,
        tid: Tid,
        values: Vec<Value>,
    ) -> Result<(), ModelError> {
        let rel = self
            .schema
            .get(relation)
            .ok_or_else(|| ModelError::UnknownRelation(relation.to_owned()))?;
        if values.len() != rel.arity() {
            return Err(ModelError::Arity {
                relation: relation.to_owned(),
                expected: rel.arity(),
                found: values.len(),
            });
        }
        for (i, (v, col)) in values.iter().zip(&rel.columns).enumerate() {
            if !v.fits(col.sort) {
                return Err(ModelError::Sort {
                    relation: relation.to_owned(),
                    pos: i + 1,
                    sort: col.sort,
                    value: v.clone(),
                });
            }
        }
        if tid == 0 {
            return Err(ModelError::ZeroTid(relation.to_owned()));
        }
        let rows = self.relations.entry(relation.to_owned()).or_default();
        if rows.contains_key(&tid) {
            return Err(ModelError::DuplicateTid {
                relation: relation.to_owned(),
                tid,
            });
        }
        rows.insert(tid, values);
        Ok(())
    }

    /// Inserts with the next free tid of the relation and returns it.
    pub fn push(&mut self, relation: &str, values: Vec<Value>) -> Result<Tid, ModelError> {
        let tid = self.next_tid(relation);
        self.insert(relation, tid, values)?;
        Ok(tid)
    }

    pub fn next_tid(&self, relation: &str) -> Tid {
        self.relations
            .get(relation)
            .and_then(|rows| rows.keys().next_back())
            .map_or(1, |t| t + 1)
    }

    pub fn tuples<'a>(&'a self, relation: &str) -> impl Iterator<Item = (Tid, &'a [Value])> + 'a {
        self.relations
            .get(relation)
            .into_iter()
            .flat_map(|rows| rows.iter().map(|(t, v)| (*t, v.as_slice())))
    }

    pub fn tuple(&self, relation: &str, tid: Tid) -> Option<&[Value]> {
        self.relations
            .get(relation)
            .and_then(|rows| rows.get(&tid))
            .map(Vec::as_slice)
    }

    pub fn value(&self, cell: &Cell) -> Option<&Value> {
        self.tuple(&cell.relation, cell.tid)
            .and_then(|vals| cell.pos.checked_sub(1).and_then(|i| vals.get(i)))
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All cells currently holding a non-null value, in canonical order.
    pub fn non_null_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (rel, rows) in &self.relations {
            for (tid, vals) in rows {
                for (i, v) in vals.iter().enumerate() {
                    if !v.is_null() {
                        out.push(Cell::new(rel.clone(), *tid, i + 1));
                    }
                }
            }
        }
        out
    }

    /// The instance as a set of (relation, values) atoms, forgetting tids.
    pub fn atom_set(&self) -> BTreeSet<(String, Vec<Value>)> {
        self.relations
            .iter()
            .flat_map(|(rel, rows)| rows.values().map(move |v| (rel.clone(), v.clone())))
            .collect()
    }

    /// Same relations, same tids, same cardinalities.
    pub fn is_correlated_with(&self, other: &Instance) -> bool {
        self.relations.len() == other.relations.len()
            && self.relations.iter().all(|(rel, rows)| {
                other
                    .relations
                    .get(rel)
                    .is_some_and(|o| o.len() == rows.len() && o.keys().eq(rows.keys()))
            })
    }

    fn set_null(&mut self, cell: &Cell) {
        if let Some(v) = self
            .relations
            .get_mut(&cell.relation)
            .and_then(|rows| rows.get_mut(&cell.tid))
            .and_then(|vals| vals.get_mut(cell.pos - 1))
        {
            *v = Value::Null;
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rel in self.schema.relations() {
            for (tid, vals) in self.tuples(&rel.name) {
                write!(f, "@{tid} {}(", rel.name)?;
                for (i, v) in vals.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                writeln!(f, ").")?;
            }
        }
        Ok(())
    }
}

fn check_cell(base: &Instance, cell: &Cell) -> Result<(), ModelError> {
    match base.value(cell) {
        None => Err(ModelError::Address(cell.clone())),
        Some(Value::Null) => Err(ModelError::AlreadyNull(cell.clone())),
        Some(_) => Ok(()),
    }
}

/// Replaces exactly the cells of `cs` by null. The result is correlated with
/// `base`.
pub fn apply_changes(base: &Instance, cs: &ChangeSet) -> Result<Instance, ModelError> {
    let mut out = base.clone();
    for cell in cs.iter() {
        check_cell(base, cell)?;
        out.set_null(cell);
    }
    Ok(out)
}

/// Inverse of [`apply_changes`] for correlated instances.
pub fn diff_changes(base: &Instance, other: &Instance) -> Result<ChangeSet, ModelError> {
    if !base.is_correlated_with(other) {
        return Err(ModelError::NotCorrelated);
    }
    let mut cs = ChangeSet::new();
    for (rel, rows) in &base.relations {
        for (tid, vals) in rows {
            let theirs = &other.relations[rel][tid];
            if theirs.len() != vals.len() {
                return Err(ModelError::NotCorrelated);
            }
            for (i, (a, b)) in vals.iter().zip(theirs).enumerate() {
                if a != b {
                    let cell = Cell::new(rel.clone(), *tid, i + 1);
                    if !b.is_null() || a.is_null() {
                        return Err(ModelError::NonNullDifference(cell));
                    }
                    cs.insert(cell);
                }
            }
        }
    }
    Ok(cs)
}
