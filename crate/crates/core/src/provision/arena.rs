use std::collections::BTreeMap;

use super::{required_elements, MemoryPlan};
use crate::envelope::{check_overflow, EnvelopeSpec};
use crate::sampler::IterationMetadata;
use crate::{Error, Result};

/// Metadata slot names for a pipeline of `hops` hops: the draw total of each
/// hop and the number of vertices each hop adds.
pub fn metadata_keys(hops: usize) -> Vec<String> {
    (1..=hops)
        .flat_map(|h| [draws_key(h), unique_key(h)])
        .collect()
}

pub fn draws_key(hop: usize) -> String {
    format!("hop{hop}_draws")
}

pub fn unique_key(hop: usize) -> String {
    format!("hop{hop}_unique")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferHandle {
    pub id: u32,
    pub capacity: usize,
}

/// Buffers allocated once with stable ids, plus fixed metadata slots.
#[derive(Debug, Clone)]
pub struct BufferArena {
    buffers: BTreeMap<String, BufferHandle>,
    slots: BTreeMap<String, u32>,
    values: Vec<u64>,
    allocation_epoch: u64,
    next_id: u32,
}

impl BufferArena {
    pub fn new(plan: &MemoryPlan, metadata_keys: &[String]) -> Result<Self> {
        let mut buffers = BTreeMap::new();
        let mut next_id = 0u32;
        for b in &plan.buffers {
            let handle = BufferHandle {
                id: next_id,
                capacity: b.elements,
            };
            if buffers.insert(b.name.clone(), handle).is_some() {
                return Err(Error::Config(format!("duplicate buffer `{}`", b.name)));
            }
            next_id += 1;
        }
        let mut slots = BTreeMap::new();
        for (i, key) in metadata_keys.iter().enumerate() {
            if slots.insert(key.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("duplicate metadata key `{key}`")));
            }
        }
        Ok(Self {
            buffers,
            values: vec![0; slots.len()],
            slots,
            allocation_epoch: 0,
            next_id,
        })
    }

    pub fn allocation_epoch(&self) -> u64 {
        self.allocation_epoch
    }

    pub fn handle(&self, name: &str) -> Option<BufferHandle> {
        self.buffers.get(name).copied()
    }

    /// Name to id map, ordered by name.
    pub fn buffer_ids(&self) -> BTreeMap<String, u32> {
        self.buffers
            .iter()
            .map(|(k, h)| (k.clone(), h.id))
            .collect()
    }

    /// Claims `elements` of a buffer for the current iteration.
    pub fn request(&self, name: &str, elements: usize) -> Result<BufferHandle> {
        let handle = self
            .handle(name)
            .ok_or_else(|| Error::Config(format!("unknown buffer `{name}`")))?;
        if elements > handle.capacity {
            return Err(Error::Capacity {
                name: name.to_string(),
                capacity: handle.capacity,
                requested: elements,
            });
        }
        Ok(handle)
    }

    /// Replaces a buffer with a fresh allocation. Any captured replay that
    /// referenced the old id becomes invalid.
    pub fn reallocate(&mut self, name: &str, capacity: usize) -> Result<BufferHandle> {
        let id = self.next_id;
        let slot = self
            .buffers
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("unknown buffer `{name}`")))?;
        *slot = BufferHandle { id, capacity };
        self.next_id += 1;
        self.allocation_epoch += 1;
        Ok(*slot)
    }

    pub fn slot(&self, key: &str) -> Result<u32> {
        self.slots
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown metadata key `{key}`")))
    }

    /// Overwrites a metadata slot in place and returns its id.
    pub fn write_metadata(&mut self, key: &str, value: u64) -> Result<u32> {
        let slot = self.slot(key)?;
        self.values[slot as usize] = value;
        Ok(slot)
    }

    pub fn read_metadata(&self, key: &str) -> Result<u64> {
        Ok(self.values[self.slot(key)? as usize])
    }

    /// Claims every buffer an iteration needs and publishes its counts.
    fn bind(&mut self, metadata: &IterationMetadata, feature_dim: usize) -> Result<()> {
        for (name, elements) in required_elements(metadata, feature_dim) {
            self.request(&name, elements)?;
        }
        for h in 1..=metadata.hops() {
            self.write_metadata(&draws_key(h), metadata.per_hop_edge_counts[h - 1] as u64)?;
            self.write_metadata(&unique_key(h), metadata.new_vertices(h) as u64)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationOutcome {
    Normal,
    /// The iteration exceeded the envelope; the cached safe iteration ran in
    /// its place, which repeats the same computation graph on the safe batch.
    Fallback,
}

/// Runs one iteration against the arena, substituting `safe` on overflow.
pub fn run_iteration_with_fallback(
    arena: &mut BufferArena,
    envelope: &EnvelopeSpec,
    feature_dim: usize,
    metadata: &IterationMetadata,
    safe: &IterationMetadata,
) -> Result<IterationOutcome> {
    if check_overflow(safe, envelope)?.into_iter().any(|f| f) {
        return Err(Error::Config(
            "cached safe iteration exceeds the envelope; raise the safety factor".into(),
        ));
    }
    if check_overflow(metadata, envelope)?.into_iter().any(|f| f) {
        arena.bind(safe, feature_dim)?;
        Ok(IterationOutcome::Fallback)
    } else {
        arena.bind(metadata, feature_dim)?;
        Ok(IterationOutcome::Normal)
    }
}

/// Arena, envelope and cached safe iteration bundled with an overflow counter.
#[derive(Debug, Clone)]
pub struct FallbackRunner {
    arena: BufferArena,
    envelope: EnvelopeSpec,
    feature_dim: usize,
    safe: IterationMetadata,
    iterations: u64,
    fallbacks: u64,
}

impl FallbackRunner {
    /// `safe` is the warm-up iteration; it must fit the envelope.
    pub fn new(
        arena: BufferArena,
        envelope: EnvelopeSpec,
        feature_dim: usize,
        safe: IterationMetadata,
    ) -> Result<Self> {
        if check_overflow(&safe, &envelope)?.into_iter().any(|f| f) {
            return Err(Error::Config(
                "warm-up iteration exceeds the envelope; raise the safety factor".into(),
            ));
        }
        Ok(Self {
            arena,
            envelope,
            feature_dim,
            safe,
            iterations: 0,
            fallbacks: 0,
        })
    }

    pub fn run(&mut self, metadata: &IterationMetadata) -> Result<IterationOutcome> {
        let outcome = run_iteration_with_fallback(
            &mut self.arena,
            &self.envelope,
            self.feature_dim,
            metadata,
            &self.safe,
        )?;
        self.iterations += 1;
        if outcome == IterationOutcome::Fallback {
            self.fallbacks += 1;
        }
        Ok(outcome)
    }

    pub fn arena(&self) -> &BufferArena {
        &self.arena
    }

    pub fn safe(&self) -> &IterationMetadata {
        &self.safe
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }
}
