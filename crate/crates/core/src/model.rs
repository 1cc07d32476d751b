//! Columnar data model and basket payload serialization.
//!
//! A column is either *fixed* (one scalar per event) or *variable* (a
//! possibly empty array of scalars per event). Fixed columns serialize to a
//! single little-endian data blob. Variable columns serialize to two blobs:
//! the concatenated element bytes, and a per-event array of byte offsets
//! (`u32`, little-endian) pointing at the first byte of each event's
//! elements. The total length is implied by the data blob length, so there
//! is no trailing sentinel offset.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Width in bytes of one serialized offset entry.
pub const OFFSET_WIDTH: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed offsets: {0}")]
    MalformedOffsets(String),
    #[error("data blob of {len} bytes is not a multiple of element width {width}")]
    BadBlobLength { len: usize, width: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

/// Physical element type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    I32,
    I64,
    F32,
    F64,
    U8,
}

impl ElementType {
    pub const fn width(self) -> usize {
        match self {
            ElementType::I32 | ElementType::F32 => 4,
            ElementType::I64 | ElementType::F64 => 8,
            ElementType::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementType::I32 => "i32",
            ElementType::I64 => "i64",
            ElementType::F32 => "f32",
            ElementType::F64 => "f64",
            ElementType::U8 => "u8",
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    Fixed,
    Variable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub element_type: ElementType,
    pub arity: Arity,
}

impl ColumnSchema {
    pub fn fixed(name: impl Into<String>, element_type: ElementType) -> Self {
        ColumnSchema {
            name: name.into(),
            element_type,
            arity: Arity::Fixed,
        }
    }

    pub fn variable(name: impl Into<String>, element_type: ElementType) -> Self {
        ColumnSchema {
            name: name.into(),
            element_type,
            arity: Arity::Variable,
        }
    }

    pub fn width(&self) -> usize {
        self.element_type.width()
    }

    pub fn is_variable(&self) -> bool {
        self.arity == Arity::Variable
    }
}

/// Ordered list of columns making up a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    columns: Vec<ColumnSchema>,
}

impl Schema {
    /// Builds a schema, rejecting empty or duplicate column names.
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() {
                return Err(ModelError::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(ModelError::InvalidSchema(format!(
                    "duplicate column name {:?}",
                    c.name
                )));
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// A scalar type that can be stored in a column.
pub trait Element: Copy + PartialEq + fmt::Debug + Send + Sync + 'static {
    const TYPE: ElementType;
    const WIDTH: usize;

    fn put_le(self, out: &mut Vec<u8>);

    /// Decodes from exactly `WIDTH` bytes.
    fn get_le(bytes: &[u8]) -> Self;
}

macro_rules! impl_element {
    ($t:ty, $variant:ident) => {
        impl Element for $t {
            const TYPE: ElementType = ElementType::$variant;
            const WIDTH: usize = std::mem::size_of::<$t>();

            #[inline]
            fn put_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            #[inline]
            fn get_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("element width"))
            }
        }
    };
}

impl_element!(i32, I32);
impl_element!(i64, I64);
impl_element!(f32, F32);
impl_element!(f64, F64);
impl_element!(u8, U8);

/// Little-endian concatenation of `values`.
pub fn serialize_fixed_column<T: Element>(values: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * T::WIDTH);
    for &v in values {
        v.put_le(&mut out);
    }
    out
}

pub fn deserialize_fixed_column<T: Element>(data: &[u8]) -> Result<Vec<T>, ModelError> {
    if !data.len().is_multiple_of(T::WIDTH) {
        return Err(ModelError::BadBlobLength {
            len: data.len(),
            width: T::WIDTH,
        });
    }
    Ok(data.chunks_exact(T::WIDTH).map(T::get_le).collect())
}

/// Serializes per-event arrays into `(data_blob, offsets_blob)`.
///
/// # Panics
///
/// Panics if the data blob would exceed `u32::MAX` bytes.
pub fn serialize_variable_column<T: Element, E: AsRef<[T]>>(events: &[E]) -> (Vec<u8>, Vec<u8>) {
    let total: usize = events.iter().map(|e| e.as_ref().len()).sum();
    let mut data = Vec::with_capacity(total * T::WIDTH);
    let mut offsets = Vec::with_capacity(events.len() * OFFSET_WIDTH);
    for event in events {
        let start = u32::try_from(data.len()).expect("variable column data blob exceeds u32 offsets");
        offsets.extend_from_slice(&start.to_le_bytes());
        for &v in event.as_ref() {
            v.put_le(&mut data);
        }
    }
    (data, offsets)
}

pub fn encode_offsets(offsets: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(offsets.len() * OFFSET_WIDTH);
    for o in offsets {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out
}

/// Decodes an offsets blob and checks it against the data blob it indexes.
pub fn decode_offsets(
    offsets_blob: &[u8],
    data_len: usize,
    element_width: usize,
) -> Result<Vec<u32>, ModelError> {
    if !offsets_blob.len().is_multiple_of(OFFSET_WIDTH) {
        return Err(ModelError::MalformedOffsets(format!(
            "offsets blob length {} is not a multiple of {OFFSET_WIDTH}",
            offsets_blob.len()
        )));
    }
    let offsets: Vec<u32> = offsets_blob
        .chunks_exact(OFFSET_WIDTH)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    validate_offsets(&offsets, data_len, element_width)?;
    Ok(offsets)
}

pub fn validate_offsets(
    offsets: &[u32],
    data_len: usize,
    element_width: usize,
) -> Result<(), ModelError> {
    if !data_len.is_multiple_of(element_width) {
        return Err(ModelError::BadBlobLength {
            len: data_len,
            width: element_width,
        });
    }
    match offsets.first() {
        None if data_len != 0 => {
            return Err(ModelError::MalformedOffsets(format!(
                "no offsets for a {data_len}-byte data blob"
            )))
        }
        Some(&first) if first != 0 => {
            return Err(ModelError::MalformedOffsets(format!(
                "first offset is {first}, expected 0"
            )))
        }
        _ => {}
    }
    let mut prev = 0u32;
    for (i, &o) in offsets.iter().enumerate() {
        if o < prev {
            return Err(ModelError::MalformedOffsets(format!(
                "offset {i} ({o}) is below its predecessor ({prev})"
            )));
        }
        if o as usize > data_len {
            return Err(ModelError::MalformedOffsets(format!(
                "offset {i} ({o}) exceeds data length {data_len}"
            )));
        }
        if !(o as usize).is_multiple_of(element_width) {
            return Err(ModelError::MalformedOffsets(format!(
                "offset {i} ({o}) is not a multiple of element width {element_width}"
            )));
        }
        prev = o;
    }
    Ok(())
}

pub fn deserialize_variable_column<T: Element>(
    data: &[u8],
    offsets_blob: &[u8],
) -> Result<Vec<Vec<T>>, ModelError> {
    let offsets = decode_offsets(offsets_blob, data.len(), T::WIDTH)?;
    let mut events = Vec::with_capacity(offsets.len());
    for (i, &start) in offsets.iter().enumerate() {
        let end = offsets.get(i + 1).map_or(data.len(), |&e| e as usize);
        events.push(
            data[start as usize..end]
                .chunks_exact(T::WIDTH)
                .map(T::get_le)
                .collect(),
        );
    }
    Ok(events)
}

/// Values of one column for a run of events.
#[derive(Debug, Clone, PartialEq)]
pub enum Column<T> {
    Fixed(Vec<T>),
    Variable(Vec<Vec<T>>),
}

impl<T: Element> Column<T> {
    pub fn arity(&self) -> Arity {
        match self {
            Column::Fixed(_) => Arity::Fixed,
            Column::Variable(_) => Arity::Variable,
        }
    }

    pub fn event_count(&self) -> usize {
        match self {
            Column::Fixed(v) => v.len(),
            Column::Variable(v) => v.len(),
        }
    }

    pub fn empty(arity: Arity) -> Self {
        match arity {
            Arity::Fixed => Column::Fixed(Vec::new()),
            Arity::Variable => Column::Variable(Vec::new()),
        }
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        match self {
            Column::Fixed(v) => Column::Fixed(v[range].to_vec()),
            Column::Variable(v) => Column::Variable(v[range].to_vec()),
        }
    }

    /// Appends `other`; both must have the same arity.
    pub fn extend(&mut self, other: Column<T>) {
        match (self, other) {
            (Column::Fixed(a), Column::Fixed(b)) => a.extend(b),
            (Column::Variable(a), Column::Variable(b)) => a.extend(b),
            _ => panic!("cannot mix fixed and variable columns"),
        }
    }

    /// Serializes into a data blob plus per-event byte end positions.
    fn serialize_with_ends(&self) -> SerializedColumn {
        match self {
            Column::Fixed(v) => SerializedColumn {
                data: serialize_fixed_column(v),
                event_ends: (1..=v.len()).map(|i| i * T::WIDTH).collect(),
            },
            Column::Variable(events) => {
                let mut data = Vec::new();
                let mut event_ends = Vec::with_capacity(events.len());
                for e in events {
                    for &x in e {
                        x.put_le(&mut data);
                    }
                    event_ends.push(data.len());
                }
                SerializedColumn { data, event_ends }
            }
        }
    }

    fn decode(data: &[u8], offsets: Option<&[u8]>) -> Result<Self, ModelError> {
        match offsets {
            None => deserialize_fixed_column(data).map(Column::Fixed),
            Some(o) => deserialize_variable_column(data, o).map(Column::Variable),
        }
    }
}

/// Column values of any supported element type.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    I32(Column<i32>),
    I64(Column<i64>),
    F32(Column<f32>),
    F64(Column<f64>),
    U8(Column<u8>),
}

macro_rules! dispatch {
    ($value:expr, $col:ident => $body:expr) => {
        match $value {
            ColumnValues::I32($col) => $body,
            ColumnValues::I64($col) => $body,
            ColumnValues::F32($col) => $body,
            ColumnValues::F64($col) => $body,
            ColumnValues::U8($col) => $body,
        }
    };
}

macro_rules! dispatch_map {
    ($value:expr, $col:ident => $body:expr) => {
        match $value {
            ColumnValues::I32($col) => ColumnValues::I32($body),
            ColumnValues::I64($col) => ColumnValues::I64($body),
            ColumnValues::F32($col) => ColumnValues::F32($body),
            ColumnValues::F64($col) => ColumnValues::F64($body),
            ColumnValues::U8($col) => ColumnValues::U8($body),
        }
    };
}

impl ColumnValues {
    pub fn empty(schema: &ColumnSchema) -> Self {
        match schema.element_type {
            ElementType::I32 => ColumnValues::I32(Column::empty(schema.arity)),
            ElementType::I64 => ColumnValues::I64(Column::empty(schema.arity)),
            ElementType::F32 => ColumnValues::F32(Column::empty(schema.arity)),
            ElementType::F64 => ColumnValues::F64(Column::empty(schema.arity)),
            ElementType::U8 => ColumnValues::U8(Column::empty(schema.arity)),
        }
    }

    pub fn element_type(&self) -> ElementType {
        match self {
            ColumnValues::I32(_) => ElementType::I32,
            ColumnValues::I64(_) => ElementType::I64,
            ColumnValues::F32(_) => ElementType::F32,
            ColumnValues::F64(_) => ElementType::F64,
            ColumnValues::U8(_) => ElementType::U8,
        }
    }

    pub fn arity(&self) -> Arity {
        dispatch!(self, c => c.arity())
    }

    pub fn event_count(&self) -> usize {
        dispatch!(self, c => c.event_count())
    }

    pub fn matches(&self, schema: &ColumnSchema) -> bool {
        self.element_type() == schema.element_type && self.arity() == schema.arity
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        dispatch_map!(self, c => c.slice(range))
    }

    /// Appends `other`, which must have the same element type and arity.
    pub fn extend(&mut self, other: ColumnValues) {
        match (self, other) {
            (ColumnValues::I32(a), ColumnValues::I32(b)) => a.extend(b),
            (ColumnValues::I64(a), ColumnValues::I64(b)) => a.extend(b),
            (ColumnValues::F32(a), ColumnValues::F32(b)) => a.extend(b),
            (ColumnValues::F64(a), ColumnValues::F64(b)) => a.extend(b),
            (ColumnValues::U8(a), ColumnValues::U8(b)) => a.extend(b),
            _ => panic!("cannot extend column with values of a different type"),
        }
    }

    pub(crate) fn serialize_with_ends(&self) -> SerializedColumn {
        dispatch!(self, c => c.serialize_with_ends())
    }

    /// Rebuilds values from a basket's (already decompressed) blobs.
    pub fn from_blobs(
        schema: &ColumnSchema,
        data: &[u8],
        offsets: Option<&[u8]>,
    ) -> Result<Self, ModelError> {
        if schema.is_variable() != offsets.is_some() {
            return Err(ModelError::SchemaMismatch(format!(
                "column {:?}: offsets blob presence does not match arity",
                schema.name
            )));
        }
        Ok(match schema.element_type {
            ElementType::I32 => ColumnValues::I32(Column::decode(data, offsets)?),
            ElementType::I64 => ColumnValues::I64(Column::decode(data, offsets)?),
            ElementType::F32 => ColumnValues::F32(Column::decode(data, offsets)?),
            ElementType::F64 => ColumnValues::F64(Column::decode(data, offsets)?),
            ElementType::U8 => ColumnValues::U8(Column::decode(data, offsets)?),
        })
    }
}

macro_rules! impl_from_column {
    ($t:ty, $variant:ident) => {
        impl From<Column<$t>> for ColumnValues {
            fn from(c: Column<$t>) -> Self {
                ColumnValues::$variant(c)
            }
        }
    };
}

impl_from_column!(i32, I32);
impl_from_column!(i64, I64);
impl_from_column!(f32, F32);
impl_from_column!(f64, F64);
impl_from_column!(u8, U8);

/// Serialized bytes of a column run, with the byte end of every event.
pub(crate) struct SerializedColumn {
    pub data: Vec<u8>,
    pub event_ends: Vec<usize>,
}

impl SerializedColumn {
    pub fn event_start(&self, event: usize) -> usize {
        if event == 0 {
            0
        } else {
            self.event_ends[event - 1]
        }
    }
}

/// Values of every schema column for the same contiguous run of events.
#[derive(Debug, Clone, PartialEq)]
pub struct EventBatch {
    columns: Vec<ColumnValues>,
    event_count: usize,
}

impl EventBatch {
    pub fn new(columns: Vec<ColumnValues>) -> Result<Self, ModelError> {
        let event_count = columns.first().map_or(0, ColumnValues::event_count);
        if let Some((i, c)) = columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.event_count() != event_count)
        {
            return Err(ModelError::SchemaMismatch(format!(
                "column {i} covers {} events, column 0 covers {event_count}",
                c.event_count()
            )));
        }
        Ok(EventBatch {
            columns,
            event_count,
        })
    }

    pub fn columns(&self) -> &[ColumnValues] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<ColumnValues> {
        self.columns
    }

    pub fn event_count(&self) -> usize {
        self.event_count
    }

    pub fn check_schema(&self, schema: &Schema) -> Result<(), ModelError> {
        if self.columns.len() != schema.len() {
            return Err(ModelError::SchemaMismatch(format!(
                "batch has {} columns, schema has {}",
                self.columns.len(),
                schema.len()
            )));
        }
        for (values, col) in self.columns.iter().zip(schema.columns()) {
            if !values.matches(col) {
                return Err(ModelError::SchemaMismatch(format!(
                    "column {:?} expects {:?} {}, batch holds {:?} {}",
                    col.name,
                    col.arity,
                    col.element_type,
                    values.arity(),
                    values.element_type()
                )));
            }
        }
        Ok(())
    }

    /// Total serialized bytes of the batch, counting offsets of variable columns.
    pub fn serialized_size(&self) -> usize {
        self.columns
            .iter()
            .map(|c| {
                let width = c.element_type().width();
                dispatch!(c, col => match col {
                    Column::Fixed(v) => v.len() * width,
                    Column::Variable(v) => v.iter().map(|e| e.len() * width + OFFSET_WIDTH).sum(),
                })
            })
            .sum()
    }
}
