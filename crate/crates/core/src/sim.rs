//! Byte-level simulation of the placement and delivery phases.
//!
//! Every file is cut into one subfile per user subset `S`, all subfiles of
//! the same type `|S|` having the same length. Placement multicasts
//! `W_{n,S}` to the users in `S`; delivery sends, for every non-empty `S`,
//! the XOR of `W_{D_k, S∖{k}}` over `k ∈ S`. Users then peel their cached
//! subfiles off each message and reassemble their requested file, which is
//! compared byte for byte against the library.

use std::collections::HashMap;
use std::ops::Range;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{binom, SystemConfig, TypeAllocation};

/// Subsets are enumerated exhaustively, so the user count is capped.
pub const MAX_SIM_USERS: usize = 20;

/// Default file length in units: `2520·K`, divisible by every integer up to 10.
pub fn default_file_length(users: usize) -> usize {
    2520 * users
}

/// A set of users encoded as a bitmask; bit `k` is user `k` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserSet(pub u64);

impl UserSet {
    pub fn singleton(user: usize) -> Self {
        UserSet(1 << user)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, user: usize) -> bool {
        self.0 >> user & 1 == 1
    }

    pub fn with(self, user: usize) -> Self {
        UserSet(self.0 | 1 << user)
    }

    pub fn without(self, user: usize) -> Self {
        UserSet(self.0 & !(1 << user))
    }

    /// Members in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let k = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(k)
        })
    }

    /// Every non-empty subset of `0..users`, in increasing mask order.
    pub fn all_nonempty(users: usize) -> impl Iterator<Item = UserSet> {
        (1..1u64 << users).map(UserSet)
    }
}

/// Integer subfile sizes: `sizes[t]` units per type-`t` subfile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuantizedAllocation {
    file_length: usize,
    sizes: Vec<usize>,
}

impl QuantizedAllocation {
    /// Validates `Σ C(K,t)·sizes[t] = file_length`.
    pub fn new(file_length: usize, sizes: Vec<usize>) -> Result<Self> {
        let users = sizes.len().saturating_sub(1);
        if sizes.len() < 2 || users > MAX_SIM_USERS {
            return Err(Error::Quantization(format!(
                "need between 1 and {MAX_SIM_USERS} users, got {users}"
            )));
        }
        let total: usize = sizes
            .iter()
            .enumerate()
            .map(|(t, &s)| multiplicity(users, t) * s)
            .sum();
        if total != file_length {
            return Err(Error::Quantization(format!(
                "subfiles cover {total} units, file length is {file_length}"
            )));
        }
        Ok(Self { file_length, sizes })
    }

    pub fn file_length(&self) -> usize {
        self.file_length
    }

    pub fn users(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn size(&self, t: usize) -> usize {
        self.sizes[t]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// The allocation this quantization realizes exactly: `y_t = C(K,t)·s_t / F`.
    pub fn to_allocation(&self) -> TypeAllocation<f64> {
        let k = self.users();
        let f = self.file_length as f64;
        let y: Vec<f64> = (0..=k)
            .map(|t| (multiplicity(k, t) * self.sizes[t]) as f64 / f)
            .collect();
        TypeAllocation::new(y).expect("integer partition of the file sums to one")
    }
}

fn multiplicity(users: usize, t: usize) -> usize {
    binom(users as u64, t as u64).expect("users <= MAX_SIM_USERS") as usize
}

/// Rounds an allocation to integer subfile sizes for files of `file_length` units.
///
/// Coded types are floored, every positive type is kept at one unit or
/// more, and the largest fractional remainders are rounded up while the
/// reactive part can absorb them. The reactive size `s_0` takes whatever is
/// left so the partition is exact.
pub fn quantize(alloc: &TypeAllocation<f64>, file_length: usize) -> Result<QuantizedAllocation> {
    let k = alloc.users();
    if k > MAX_SIM_USERS {
        return Err(Error::Quantization(format!(
            "{k} users exceeds the simulator limit of {MAX_SIM_USERS}"
        )));
    }
    let positive = alloc.support().len();
    if file_length < positive.max(1) {
        return Err(Error::Quantization(format!(
            "file length {file_length} cannot hold {positive} non-zero types"
        )));
    }
    let f = file_length as f64;
    let targets: Vec<f64> = alloc.subfile_fractions().iter().map(|x| x * f).collect();

    let mut sizes = vec![0usize; k + 1];
    let mut remainders = Vec::new();
    let mut used = 0usize;
    for t in 1..=k {
        if alloc.share(t) <= 0.0 {
            continue;
        }
        // absorbs float noise on exactly representable targets such as 0.1·600
        let floor = (targets[t] + 1e-9).floor();
        let mut s = floor as usize;
        if s == 0 {
            s = 1;
        } else {
            remainders.push((targets[t] - floor, t));
        }
        sizes[t] = s;
        used += multiplicity(k, t) * s;
    }
    if used > file_length {
        return Err(Error::Quantization(format!(
            "file length {file_length} too small: coded types alone need {used} units"
        )));
    }

    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (frac, t) in remainders {
        if frac <= 1e-9 {
            break;
        }
        let cost = multiplicity(k, t);
        let left = file_length - used;
        if cost <= left && (left - cost) as f64 >= targets[0] - 1.0 {
            sizes[t] += 1;
            used += cost;
        }
    }
    sizes[0] = file_length - used;
    QuantizedAllocation::new(file_length, sizes)
}

/// `files` pseudorandom byte strings of identical length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Library {
    files: Vec<Vec<u8>>,
}

impl Library {
    pub fn generate(files: usize, file_length: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let files = (0..files)
            .map(|_| {
                let mut buf = vec![0u8; file_length];
                rng.fill_bytes(&mut buf);
                buf
            })
            .collect();
        Self { files }
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn file_length(&self) -> usize {
        self.files.first().map_or(0, Vec::len)
    }

    pub fn file(&self, n: usize) -> &[u8] {
        &self.files[n]
    }
}

/// Byte ranges of each subfile `W_{n,S}` inside a file, indexed by mask.
#[derive(Debug, Clone)]
pub struct SubfileLayout {
    users: usize,
    offsets: Vec<usize>,
}

impl SubfileLayout {
    pub fn new(q: &QuantizedAllocation) -> Self {
        let users = q.users();
        let mut offsets = Vec::with_capacity((1 << users) + 1);
        let mut at = 0;
        offsets.push(0);
        for mask in 0..1u64 << users {
            at += q.size(mask.count_ones() as usize);
            offsets.push(at);
        }
        Self { users, offsets }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn range(&self, set: UserSet) -> Range<usize> {
        let m = set.0 as usize;
        self.offsets[m]..self.offsets[m + 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Placement,
    Delivery,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub recipients: UserSet,
    /// Source file for placement transmissions.
    pub file: Option<usize>,
    pub payload: Vec<u8>,
}

impl Transmission {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }
}

/// Everything sent during one phase and its cost in file lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub phase: Phase,
    pub transmissions: Vec<Transmission>,
    pub measured_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmissionRecord {
    /// 1-based user indices.
    pub recipients: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<usize>,
    pub length: usize,
    /// Hex SHA-256 of the payload.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptExport {
    pub phase: Phase,
    pub measured_cost: f64,
    pub total_units: usize,
    pub transmissions: Vec<TransmissionRecord>,
}

impl Transcript {
    pub fn total_units(&self) -> usize {
        self.transmissions.iter().map(Transmission::len).sum()
    }

    pub fn export(&self) -> TranscriptExport {
        let transmissions = self
            .transmissions
            .iter()
            .map(|tx| TransmissionRecord {
                recipients: tx.recipients.members().map(|k| k + 1).collect(),
                file: tx.file.map(|n| n + 1),
                length: tx.len(),
                digest: hex::encode(Sha256::digest(&tx.payload)),
            })
            .collect();
        TranscriptExport {
            phase: self.phase,
            measured_cost: self.measured_cost,
            total_units: self.total_units(),
            transmissions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("transcript export is plain data")
    }
}

/// One user's memory after placement: `(file, label) → subfile`.
#[derive(Debug, Clone, Default)]
pub struct UserCache {
    entries: HashMap<(usize, UserSet), Vec<u8>>,
}

impl UserCache {
    pub fn get(&self, file: usize, label: UserSet) -> Option<&[u8]> {
        self.entries.get(&(file, label)).map(Vec::as_slice)
    }

    pub fn labels(&self) -> impl Iterator<Item = (usize, UserSet)> + '_ {
        self.entries.keys().copied()
    }

    /// Units of file `n` held in this cache.
    pub fn units_for_file(&self, n: usize) -> usize {
        self.entries
            .iter()
            .filter(|((f, _), _)| *f == n)
            .map(|(_, v)| v.len())
            .sum()
    }
}

/// Placement result: the transcript, every user's cache and the subfile layout.
#[derive(Debug, Clone)]
pub struct Placement {
    pub transcript: Transcript,
    pub caches: Vec<UserCache>,
    pub layout: SubfileLayout,
    file_length: usize,
}

impl Placement {
    pub fn file_length(&self) -> usize {
        self.file_length
    }
}

fn check_consistent(
    config: &SystemConfig<f64>,
    lib: &Library,
    q: &QuantizedAllocation,
) -> Result<()> {
    if config.users() > MAX_SIM_USERS {
        return Err(Error::Precondition(format!(
            "{} users exceeds the simulator limit of {MAX_SIM_USERS}",
            config.users()
        )));
    }
    if q.users() != config.users() {
        return Err(Error::Precondition(format!(
            "allocation is for {} users, instance has {}",
            q.users(),
            config.users()
        )));
    }
    if lib.len() != config.files() {
        return Err(Error::Precondition(format!(
            "library has {} files, instance has {}",
            lib.len(),
            config.files()
        )));
    }
    if lib.file_length() != q.file_length() {
        return Err(Error::Precondition(format!(
            "library files are {} units, allocation expects {}",
            lib.file_length(),
            q.file_length()
        )));
    }
    Ok(())
}

/// Multicasts every non-empty subfile `W_{n,S}` to the users in `S`.
pub fn run_placement(
    config: &SystemConfig<f64>,
    lib: &Library,
    q: &QuantizedAllocation,
) -> Result<Placement> {
    check_consistent(config, lib, q)?;
    let k = config.users();
    let layout = SubfileLayout::new(q);
    let costs: Vec<f64> = (1..=k)
        .map(|r| config.placement_cost(r))
        .collect::<Result<_>>()?;

    let mut caches = vec![UserCache::default(); k];
    let mut transmissions = Vec::new();
    let mut weighted = 0.0;
    for n in 0..lib.len() {
        for set in UserSet::all_nonempty(k) {
            let range = layout.range(set);
            if range.is_empty() {
                continue;
            }
            let payload = lib.file(n)[range].to_vec();
            for user in set.members() {
                caches[user].entries.insert((n, set), payload.clone());
            }
            weighted += payload.len() as f64 * costs[set.len() - 1];
            transmissions.push(Transmission { recipients: set, file: Some(n), payload });
        }
    }

    Ok(Placement {
        transcript: Transcript {
            phase: Phase::Placement,
            transmissions,
            measured_cost: weighted / q.file_length() as f64,
        },
        caches,
        layout,
        file_length: q.file_length(),
    })
}

/// Distinct file requests, one per user (0-based file indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demand(Vec<usize>);

impl Demand {
    pub fn new(requests: Vec<usize>, users: usize, files: usize) -> Result<Self> {
        if requests.len() != users {
            return Err(Error::InvalidDemand(format!(
                "{} requests for {users} users",
                requests.len()
            )));
        }
        if let Some(&f) = requests.iter().find(|&&f| f >= files) {
            return Err(Error::InvalidDemand(format!("file {} does not exist", f + 1)));
        }
        let mut seen = vec![false; files];
        for &f in &requests {
            if std::mem::replace(&mut seen[f], true) {
                return Err(Error::InvalidDemand(format!(
                    "file {} requested twice; only distinct demands are supported",
                    f + 1
                )));
            }
        }
        Ok(Self(requests))
    }

    /// User `k` requests file `k`.
    pub fn identity(users: usize) -> Self {
        Self((0..users).collect())
    }

    pub fn file_for(&self, user: usize) -> usize {
        self.0[user]
    }

    pub fn requests(&self) -> &[usize] {
        &self.0
    }
}

fn xor_into(acc: &mut [u8], other: &[u8]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

/// Builds one coded message per non-empty `S` (in mask order):
/// `⊕_{k∈S} W_{D_k, S∖{k}}`.
pub fn run_delivery(
    config: &SystemConfig<f64>,
    lib: &Library,
    placement: &Placement,
    demand: &Demand,
) -> Result<Transcript> {
    let k = config.users();
    if placement.layout.users() != k || placement.caches.len() != k {
        return Err(Error::Precondition("placement was run for a different instance".into()));
    }
    if lib.file_length() != placement.file_length || lib.len() != config.files() {
        return Err(Error::Precondition("library does not match the placement".into()));
    }
    // re-validate against this instance
    let demand = Demand::new(demand.0.clone(), k, config.files())?;

    let mut transmissions = Vec::with_capacity((1 << k) - 1);
    let mut units = 0usize;
    for set in UserSet::all_nonempty(k) {
        let mut members = set.members();
        let first = members.next().expect("non-empty set");
        let mut payload =
            lib.file(demand.file_for(first))[placement.layout.range(set.without(first))].to_vec();
        for user in members {
            xor_into(
                &mut payload,
                &lib.file(demand.file_for(user))[placement.layout.range(set.without(user))],
            );
        }
        units += payload.len();
        transmissions.push(Transmission { recipients: set, file: None, payload });
    }
    Ok(Transcript {
        phase: Phase::Delivery,
        transmissions,
        measured_cost: units as f64 / placement.file_length as f64,
    })
}

/// Reconstructs each user's requested file from its cache and the delivery messages.
pub fn decode_all(
    placement: &Placement,
    delivery: &Transcript,
    demand: &Demand,
) -> Result<Vec<Vec<u8>>> {
    let k = placement.layout.users();
    if delivery.transmissions.len() != (1 << k) - 1 || demand.requests().len() != k {
        return Err(Error::Precondition("delivery transcript does not match the placement".into()));
    }
    let mut out = Vec::with_capacity(k);
    for user in 0..k {
        let cache = &placement.caches[user];
        let wanted = demand.file_for(user);
        let mut file = vec![0u8; placement.file_length];
        let fail = || Error::DecodeFailure { user: user + 1, file: wanted + 1 };

        for label in (0..1u64 << k).map(UserSet) {
            let range = placement.layout.range(label);
            if range.is_empty() {
                continue;
            }
            if label.contains(user) {
                let piece = cache.get(wanted, label).ok_or_else(fail)?;
                file[range].copy_from_slice(piece);
                continue;
            }
            // W_{wanted, label} rides on the message for label ∪ {user}
            let set = label.with(user);
            let message = &delivery.transmissions[(set.0 - 1) as usize];
            if message.recipients != set || message.len() != range.len() {
                return Err(fail());
            }
            let mut piece = message.payload.clone();
            for other in set.members().filter(|&u| u != user) {
                let known = cache
                    .get(demand.file_for(other), set.without(other))
                    .ok_or_else(fail)?;
                xor_into(&mut piece, known);
            }
            file[range].copy_from_slice(&piece);
        }
        out.push(file);
    }
    Ok(out)
}

/// Per-user flag: reconstructed file equals the requested library file.
pub fn reconstruction_status(lib: &Library, demand: &Demand, decoded: &[Vec<u8>]) -> Vec<bool> {
    decoded
        .iter()
        .enumerate()
        .map(|(user, f)| f.as_slice() == lib.file(demand.file_for(user)))
        .collect()
}

/// Fails on the first user whose reconstruction differs from the library.
pub fn verify_reconstruction(lib: &Library, demand: &Demand, decoded: &[Vec<u8>]) -> Result<()> {
    match reconstruction_status(lib, demand, decoded).iter().position(|ok| !ok) {
        Some(user) => Err(Error::DecodeFailure { user: user + 1, file: demand.file_for(user) + 1 }),
        None => Ok(()),
    }
}

/// Measured and predicted rates of one end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCheck {
    pub measured: f64,
    /// Rate formula at the quantized allocation.
    pub formula_quantized: f64,
    /// Rate formula at the requested (unquantized) allocation.
    pub formula_target: f64,
    /// Allowed `|measured − formula_quantized|`.
    pub bound: f64,
}

impl RateCheck {
    pub fn delta(&self) -> f64 {
        (self.measured - self.formula_quantized).abs()
    }

    pub fn within_bound(&self) -> bool {
        self.delta() <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub file_length: usize,
    pub seed: u64,
    pub sizes: Vec<usize>,
    /// 1-based file index requested by each user.
    pub demand: Vec<usize>,
    pub placement: RateCheck,
    pub delivery: RateCheck,
    pub decoded: Vec<bool>,
}

impl SimulationReport {
    pub fn passed(&self) -> bool {
        self.placement.within_bound()
            && self.delivery.within_bound()
            && self.decoded.iter().all(|&ok| ok)
    }
}

/// Quantizes, places, delivers and decodes one instance.
pub fn simulate(
    config: &SystemConfig<f64>,
    alloc: &TypeAllocation<f64>,
    file_length: usize,
    seed: u64,
    demand: &Demand,
) -> Result<SimulationReport> {
    simulate_with_transcripts(config, alloc, file_length, seed, demand).map(|(report, ..)| report)
}

/// [`simulate`], also returning the placement and delivery transcripts.
pub fn simulate_with_transcripts(
    config: &SystemConfig<f64>,
    alloc: &TypeAllocation<f64>,
    file_length: usize,
    seed: u64,
    demand: &Demand,
) -> Result<(SimulationReport, Transcript, Transcript)> {
    let q = quantize(alloc, file_length)?;
    let lib = Library::generate(config.files(), file_length, seed);
    let placement = run_placement(config, &lib, &q)?;
    let delivery = run_delivery(config, &lib, &placement, demand)?;
    let decoded = decode_all(&placement, &delivery, demand)?;
    let realized = q.to_allocation();
    let k = config.users() as f64;
    let f = file_length as f64;
    let report = SimulationReport {
        file_length,
        seed,
        sizes: q.sizes().to_vec(),
        demand: demand.requests().iter().map(|n| n + 1).collect(),
        placement: RateCheck {
            measured: placement.transcript.measured_cost,
            formula_quantized: config.rate_placement(&realized),
            formula_target: config.rate_placement(alloc),
            bound: (k + 1.0) * config.files() as f64 / f,
        },
        delivery: RateCheck {
            measured: delivery.measured_cost,
            formula_quantized: config.rate_delivery(&realized),
            formula_target: config.rate_delivery(alloc),
            bound: (k + 1.0) / f,
        },
        decoded: reconstruction_status(&lib, demand, &decoded),
    };
    Ok((report, placement.transcript, delivery))
}
