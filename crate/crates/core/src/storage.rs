//! Tier hierarchy, file metadata and placement bookkeeping.
//!
//! The metadata table is the single source of truth; per-tier occupancy sets
//! and the coldness index are derived from it and kept in sync by the
//! mutating methods. All collections are ordered so that every iteration is
//! deterministic.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use ordered_float::NotNan;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a stored file.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FileId(pub u64);

impl std::fmt::Display for FileId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into the tier list. Higher index = faster and smaller tier.
pub type TierId = usize;

/// Metadata of one stored file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileRecord {
    pub file_id: FileId,
    /// Storage units; strictly positive and immutable after creation.
    pub size: u64,
    /// Hotness level in `[0, 1]`.
    pub temperature: f64,
    pub tier_id: TierId,
    /// Timestep of the most recent request, if any.
    pub last_request_step: Option<u64>,
}

impl FileRecord {
    pub fn new(file_id: FileId, size: u64, temperature: f64, tier_id: TierId) -> Self {
        Self {
            file_id,
            size,
            temperature,
            tier_id,
            last_request_step: None,
        }
    }
}

/// Static description of one storage tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    /// Capacity in storage units.
    pub capacity: u64,
    /// Service speed in storage units per time unit.
    pub speed: f64,
}

/// Observed state vector of one tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierState {
    /// Mean file temperature.
    pub s1: f64,
    /// Mean of temperature multiplied by file size.
    pub s2: f64,
    /// Queuing time pending at the tier.
    pub s3: f64,
    pub used: u64,
    pub file_count: usize,
}

impl TierState {
    pub fn as_vector(&self) -> [f64; 3] {
        [self.s1, self.s2, self.s3]
    }
}

/// Key ordering tier residents coldest-first: temperature ascending, then
/// size descending, then file id ascending.
type ColdKey = (NotNan<f64>, Reverse<u64>, FileId);

fn cold_key(rec: &FileRecord) -> ColdKey {
    (
        NotNan::new(rec.temperature).expect("temperature is finite"),
        Reverse(rec.size),
        rec.file_id,
    )
}

#[derive(Debug, Clone, Default)]
struct TierBook {
    occupancy: BTreeSet<FileId>,
    by_coldness: BTreeSet<ColdKey>,
    used: u64,
    sum_temp: f64,
    sum_temp_size: f64,
}

/// The tier list plus all placement bookkeeping.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    specs: Vec<TierSpec>,
    books: Vec<TierBook>,
    metadata: BTreeMap<FileId, FileRecord>,
    next_file_id: u64,
}

impl Hierarchy {
    /// Builds an empty hierarchy. Tiers are given slowest-first; capacity
    /// must strictly decrease and speed strictly increase with the index.
    pub fn new(specs: Vec<TierSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("hierarchy needs at least one tier".into()));
        }
        for spec in &specs {
            if spec.capacity == 0 {
                return Err(Error::Config("tier capacity must be positive".into()));
            }
            if !(spec.speed > 0.0 && spec.speed.is_finite()) {
                return Err(Error::Config("tier speed must be positive".into()));
            }
        }
        for pair in specs.windows(2) {
            if pair[1].capacity >= pair[0].capacity {
                return Err(Error::Config(
                    "tier capacity must strictly decrease with tier index".into(),
                ));
            }
            if pair[1].speed <= pair[0].speed {
                return Err(Error::Config(
                    "tier speed must strictly increase with tier index".into(),
                ));
            }
        }
        let books = specs.iter().map(|_| TierBook::default()).collect();
        Ok(Self {
            specs,
            books,
            metadata: BTreeMap::new(),
            next_file_id: 0,
        })
    }

    pub fn tier_count(&self) -> usize {
        self.specs.len()
    }

    pub fn fastest_tier(&self) -> TierId {
        self.specs.len() - 1
    }

    pub fn spec(&self, tier: TierId) -> &TierSpec {
        &self.specs[tier]
    }

    pub fn used(&self, tier: TierId) -> u64 {
        self.books[tier].used
    }

    pub fn free(&self, tier: TierId) -> u64 {
        self.specs[tier].capacity - self.books[tier].used
    }

    pub fn file_count(&self, tier: TierId) -> usize {
        self.books[tier].occupancy.len()
    }

    pub fn total_file_count(&self) -> usize {
        self.metadata.len()
    }

    pub fn total_size(&self) -> u64 {
        self.books.iter().map(|b| b.used).sum()
    }

    /// Mean file size over the whole population, zero when empty.
    pub fn mean_file_size(&self) -> f64 {
        if self.metadata.is_empty() {
            0.0
        } else {
            self.total_size() as f64 / self.metadata.len() as f64
        }
    }

    /// Sum of temperature times size over a tier's residents.
    pub fn weighted_temperature_sum(&self, tier: TierId) -> f64 {
        self.books[tier].sum_temp_size.max(0.0)
    }

    pub fn file(&self, id: FileId) -> Result<&FileRecord> {
        self.metadata.get(&id).ok_or(Error::UnknownFile(id))
    }

    pub fn contains(&self, id: FileId) -> bool {
        self.metadata.contains_key(&id)
    }

    /// All file ids in ascending order.
    pub fn file_ids(&self) -> impl Iterator<Item = FileId> + '_ {
        self.metadata.keys().copied()
    }

    pub fn records(&self) -> impl Iterator<Item = &FileRecord> {
        self.metadata.values()
    }

    /// Residents of one tier in ascending file-id order.
    pub fn files_in(&self, tier: TierId) -> impl Iterator<Item = &FileRecord> {
        self.books[tier]
            .occupancy
            .iter()
            .map(|id| &self.metadata[id])
    }

    /// Residents of one tier coldest-first (temperature ascending, then size
    /// descending, then file id ascending).
    pub fn coldest_iter(&self, tier: TierId) -> impl Iterator<Item = &FileRecord> {
        self.books[tier]
            .by_coldness
            .iter()
            .map(|(_, _, id)| &self.metadata[id])
    }

    /// Allocates the next unused file id.
    pub fn allocate_file_id(&mut self) -> FileId {
        let id = FileId(self.next_file_id);
        self.next_file_id += 1;
        id
    }

    /// Adds a new file to the tier recorded in `rec.tier_id`, subject to
    /// capacity.
    pub fn insert_file(&mut self, rec: FileRecord) -> Result<()> {
        if rec.size == 0 {
            return Err(Error::Precondition(format!(
                "file {} has zero size",
                rec.file_id
            )));
        }
        if !(0.0..=1.0).contains(&rec.temperature) {
            return Err(Error::Precondition(format!(
                "file {} temperature {} outside [0, 1]",
                rec.file_id, rec.temperature
            )));
        }
        if rec.tier_id >= self.specs.len() {
            return Err(Error::Precondition(format!(
                "tier {} does not exist",
                rec.tier_id
            )));
        }
        if self.metadata.contains_key(&rec.file_id) {
            return Err(Error::Inconsistent(format!(
                "file {} inserted twice",
                rec.file_id
            )));
        }
        let free = self.free(rec.tier_id);
        if rec.size > free {
            return Err(Error::CapacityExceeded {
                tier: rec.tier_id,
                needed: rec.size,
                free,
            });
        }
        let book = &mut self.books[rec.tier_id];
        book.occupancy.insert(rec.file_id);
        book.by_coldness.insert(cold_key(&rec));
        book.used += rec.size;
        book.sum_temp += rec.temperature;
        book.sum_temp_size += rec.temperature * rec.size as f64;
        self.next_file_id = self.next_file_id.max(rec.file_id.0 + 1);
        self.metadata.insert(rec.file_id, rec);
        Ok(())
    }

    /// Moves a file to a different tier, atomically updating occupancy and
    /// metadata. Refused when the destination lacks free capacity.
    pub fn move_file(&mut self, id: FileId, dest: TierId) -> Result<()> {
        if dest >= self.specs.len() {
            return Err(Error::Precondition(format!("tier {dest} does not exist")));
        }
        let rec = self.metadata.get(&id).ok_or(Error::UnknownFile(id))?;
        let src = rec.tier_id;
        if src == dest {
            return Err(Error::AlreadyInTier { file: id, tier: dest });
        }
        let free = self.free(dest);
        if rec.size > free {
            return Err(Error::CapacityExceeded {
                tier: dest,
                needed: rec.size,
                free,
            });
        }
        let key = cold_key(rec);
        let size = rec.size;
        let temp = rec.temperature;
        let weighted = temp * size as f64;

        let src_book = &mut self.books[src];
        src_book.occupancy.remove(&id);
        src_book.by_coldness.remove(&key);
        src_book.used -= size;
        src_book.sum_temp -= temp;
        src_book.sum_temp_size -= weighted;

        let dst_book = &mut self.books[dest];
        dst_book.occupancy.insert(id);
        dst_book.by_coldness.insert(key);
        dst_book.used += size;
        dst_book.sum_temp += temp;
        dst_book.sum_temp_size += weighted;

        self.metadata.get_mut(&id).expect("checked above").tier_id = dest;
        Ok(())
    }

    /// Sets a file's temperature, keeping aggregates and the coldness index
    /// in sync.
    pub fn set_temperature(&mut self, id: FileId, temperature: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&temperature) {
            return Err(Error::Precondition(format!(
                "temperature {temperature} outside [0, 1]"
            )));
        }
        let rec = self.metadata.get(&id).ok_or(Error::UnknownFile(id))?;
        let tier = rec.tier_id;
        let old_key = cold_key(rec);
        let old_temp = rec.temperature;
        let size = rec.size;

        let rec = self.metadata.get_mut(&id).expect("checked above");
        rec.temperature = temperature;
        let new_key = cold_key(rec);

        let book = &mut self.books[tier];
        book.by_coldness.remove(&old_key);
        book.by_coldness.insert(new_key);
        book.sum_temp += temperature - old_temp;
        book.sum_temp_size += (temperature - old_temp) * size as f64;
        Ok(())
    }

    /// Records a request against a file.
    pub fn touch(&mut self, id: FileId, timestep: u64) -> Result<()> {
        let rec = self.metadata.get_mut(&id).ok_or(Error::UnknownFile(id))?;
        rec.last_request_step = Some(timestep);
        Ok(())
    }

    /// State vector of a tier. `pending_service_time` is supplied by the
    /// queuing model and becomes `s3`. Empty tiers use the zero convention.
    pub fn tier_state(&self, tier: TierId, pending_service_time: f64) -> TierState {
        let book = &self.books[tier];
        let n = book.occupancy.len();
        let (s1, s2) = if n == 0 {
            (0.0, 0.0)
        } else {
            (
                (book.sum_temp / n as f64).clamp(0.0, 1.0),
                (book.sum_temp_size / n as f64).max(0.0),
            )
        };
        TierState {
            s1,
            s2,
            s3: pending_service_time,
            used: book.used,
            file_count: n,
        }
    }

    /// Mean temperature the tier would have after a hypothetical add and/or
    /// remove. The hierarchy is not mutated.
    pub fn hypothetical_s1(
        &self,
        tier: TierId,
        add: Option<&FileRecord>,
        remove: Option<FileId>,
    ) -> Result<f64> {
        self.hypothetical_s1_s2(tier, add, remove).map(|(s1, _)| s1)
    }

    /// Mean temperature and mean weighted temperature after a hypothetical
    /// add and/or remove.
    pub fn hypothetical_s1_s2(
        &self,
        tier: TierId,
        add: Option<&FileRecord>,
        remove: Option<FileId>,
    ) -> Result<(f64, f64)> {
        let book = &self.books[tier];
        let mut n = book.occupancy.len() as i64;
        let mut sum_temp = book.sum_temp;
        let mut sum_weighted = book.sum_temp_size;
        if let Some(id) = remove {
            if !book.occupancy.contains(&id) {
                return Err(Error::Inconsistent(format!(
                    "file {id} is not in tier {tier}"
                )));
            }
            let rec = &self.metadata[&id];
            sum_temp -= rec.temperature;
            sum_weighted -= rec.temperature * rec.size as f64;
            n -= 1;
        }
        if let Some(rec) = add {
            if book.occupancy.contains(&rec.file_id) {
                return Err(Error::Inconsistent(format!(
                    "file {} is already in tier {tier}",
                    rec.file_id
                )));
            }
            sum_temp += rec.temperature;
            sum_weighted += rec.temperature * rec.size as f64;
            n += 1;
        }
        if n <= 0 {
            Ok((0.0, 0.0))
        } else {
            Ok((
                (sum_temp / n as f64).clamp(0.0, 1.0),
                (sum_weighted / n as f64).max(0.0),
            ))
        }
    }

    /// The coldest file of a tier: minimum temperature, ties broken by
    /// larger size first, then smaller file id. `None` for an empty tier.
    pub fn coldest_file(&self, tier: TierId) -> Option<FileId> {
        self.books[tier]
            .by_coldness
            .iter()
            .next()
            .map(|(_, _, id)| *id)
    }

    /// Previews whether `need` units can be freed in `tier` for a file of
    /// temperature `incoming_temp` by displacing residents strictly colder
    /// than it, coldest-first. Returns the victim list (possibly empty when
    /// there is room already), or `None` when room cannot be created.
    pub fn eviction_preview(
        &self,
        tier: TierId,
        need: u64,
        incoming_temp: f64,
    ) -> Option<Vec<FileId>> {
        let mut free = self.free(tier);
        if free >= need {
            return Some(Vec::new());
        }
        let mut victims = Vec::new();
        for rec in self.coldest_iter(tier) {
            if rec.temperature >= incoming_temp {
                return None;
            }
            free += rec.size;
            victims.push(rec.file_id);
            if free >= need {
                return Some(victims);
            }
        }
        None
    }

    /// Verifies the conservation, capacity and bookkeeping invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = 0usize;
        for (tier, book) in self.books.iter().enumerate() {
            let mut used = 0u64;
            for id in &book.occupancy {
                let rec = self
                    .metadata
                    .get(id)
                    .ok_or_else(|| Error::Inconsistent(format!("orphan file {id}")))?;
                if rec.tier_id != tier {
                    return Err(Error::Inconsistent(format!(
                        "file {id} listed in tier {tier} but records tier {}",
                        rec.tier_id
                    )));
                }
                if !(0.0..=1.0).contains(&rec.temperature) {
                    return Err(Error::Inconsistent(format!(
                        "file {id} temperature {} outside [0, 1]",
                        rec.temperature
                    )));
                }
                used += rec.size;
                seen += 1;
            }
            if used != book.used {
                return Err(Error::Inconsistent(format!(
                    "tier {tier} used {} but sizes sum to {used}",
                    book.used
                )));
            }
            if used > self.specs[tier].capacity {
                return Err(Error::Inconsistent(format!(
                    "tier {tier} over capacity: {used} > {}",
                    self.specs[tier].capacity
                )));
            }
            if book.by_coldness.len() != book.occupancy.len() {
                return Err(Error::Inconsistent(format!(
                    "tier {tier} coldness index out of sync"
                )));
            }
        }
        if seen != self.metadata.len() {
            return Err(Error::Inconsistent(format!(
                "{} files in metadata but {seen} in occupancy sets",
                self.metadata.len()
            )));
        }
        Ok(())
    }
}
