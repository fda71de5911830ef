//! Fixed random controllers: customer orders, replenishment bundles and the
//! SKU content of pods.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{PodId, StationId};

/// Upper limit of the SKU bitmask.
pub const MAX_SKUS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
struct Line {
    sku: usize,
    claimed: bool,
    done: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Order {
    station: StationId,
    lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq)]
struct Bundle {
    sku: usize,
    station: StationId,
    pod: PodId,
    claimed: bool,
}

/// Order lines or bundles reserved for one robot's station visit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Claim {
    pub lines: Vec<(u64, usize)>,
    pub bundles: Vec<u64>,
}

impl Claim {
    pub fn units(&self) -> u32 {
        (self.lines.len() + self.bundles.len()) as u32
    }
}

#[derive(Debug, Clone)]
pub struct Controllers {
    skus: usize,
    pod_skus: Vec<u128>,
    pick: Vec<StationId>,
    repl: Vec<StationId>,
    orders: BTreeMap<u64, Order>,
    bundles: BTreeMap<u64, Bundle>,
    next_id: u64,
    order_rng: ChaCha8Rng,
    bundle_rng: ChaCha8Rng,
    pub orders_done: u64,
    pub bundles_stored: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Controllers {
    /// Pods get random assortments; SKU `i` is always stocked in pod `i mod pods`.
    pub fn new(
        pods: usize,
        pick: Vec<StationId>,
        repl: Vec<StationId>,
        skus: usize,
        backlog: usize,
        seed: u64,
    ) -> Self {
        assert!(skus > 0 && skus <= MAX_SKUS, "between 1 and {MAX_SKUS} SKUs");
        let mut pod_rng = stream(seed, 1);
        let mut pod_skus: Vec<u128> = (0..pods)
            .map(|_| (0..skus).filter(|_| pod_rng.gen_bool(0.1)).fold(0u128, |m, s| m | 1 << s))
            .collect();
        if pods > 0 {
            for s in 0..skus {
                pod_skus[s % pods] |= 1 << s;
            }
        }
        let mut c = Self {
            skus,
            pod_skus,
            pick,
            repl,
            orders: BTreeMap::new(),
            bundles: BTreeMap::new(),
            next_id: 0,
            order_rng: stream(seed, 2),
            bundle_rng: stream(seed, 3),
            orders_done: 0,
            bundles_stored: 0,
        };
        for _ in 0..backlog * c.pick.len() {
            c.new_order();
        }
        if pods > 0 {
            for _ in 0..backlog * c.repl.len() {
                c.new_bundle();
            }
        }
        c
    }

    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn new_order(&mut self) {
        let station = self.pick[self.order_rng.gen_range(0..self.pick.len())];
        let n = self.order_rng.gen_range(1..=3);
        let lines = (0..n).map(|_| Line { sku: self.order_rng.gen_range(0..self.skus), claimed: false, done: false }).collect();
        let id = self.id();
        self.orders.insert(id, Order { station, lines });
    }

    fn new_bundle(&mut self) {
        let sku = self.bundle_rng.gen_range(0..self.skus);
        let station = self.repl[self.bundle_rng.gen_range(0..self.repl.len())];
        let pod = PodId(self.bundle_rng.gen_range(0..self.pod_skus.len()) as u32);
        let id = self.id();
        self.bundles.insert(id, Bundle { sku, station, pod, claimed: false });
    }

    pub fn pod_has(&self, pod: PodId, sku: usize) -> bool {
        self.pod_skus[pod.index()] >> sku & 1 == 1
    }

    fn open_lines(&self, station: StationId) -> impl Iterator<Item = (u64, usize, &Line)> {
        self.orders
            .iter()
            .filter(move |(_, o)| o.station == station)
            .flat_map(|(&id, o)| o.lines.iter().enumerate().map(move |(i, l)| (id, i, l)))
            .filter(|(_, _, l)| !l.claimed && !l.done)
    }

    /// Open order lines at `station` that `pod` can complete.
    pub fn pick_demand(&self, station: StationId, pod: PodId) -> usize {
        self.open_lines(station).filter(|(_, _, l)| self.pod_has(pod, l.sku)).count()
    }

    /// Pods with open bundles at `station` and how many each would take.
    pub fn repl_demand(&self, station: StationId) -> BTreeMap<PodId, usize> {
        let mut out = BTreeMap::new();
        for b in self.bundles.values().filter(|b| b.station == station && !b.claimed) {
            *out.entry(b.pod).or_insert(0) += 1;
        }
        out
    }

    pub fn claim_pick(&mut self, station: StationId, pod: PodId) -> Claim {
        let keys: Vec<(u64, usize)> =
            self.open_lines(station).filter(|(_, _, l)| self.pod_has(pod, l.sku)).map(|(id, i, _)| (id, i)).collect();
        for &(id, i) in &keys {
            self.orders.get_mut(&id).unwrap().lines[i].claimed = true;
        }
        Claim { lines: keys, bundles: Vec::new() }
    }

    pub fn claim_repl(&mut self, station: StationId, pod: PodId) -> Claim {
        let keys: Vec<u64> = self
            .bundles
            .iter()
            .filter(|(_, b)| b.station == station && b.pod == pod && !b.claimed)
            .map(|(&id, _)| id)
            .collect();
        for id in &keys {
            self.bundles.get_mut(id).unwrap().claimed = true;
        }
        Claim { lines: Vec::new(), bundles: keys }
    }

    /// Marks the claimed lines picked and the claimed bundles stored. Every
    /// finished order and every stored bundle is replaced by a new one.
    pub fn complete(&mut self, claim: &Claim) {
        for &(id, i) in &claim.lines {
            let order = self.orders.get_mut(&id).unwrap();
            order.lines[i].done = true;
            if order.lines.iter().all(|l| l.done) {
                self.orders.remove(&id);
                self.orders_done += 1;
                self.new_order();
            }
        }
        for id in &claim.bundles {
            let b = self.bundles.remove(id).unwrap();
            self.pod_skus[b.pod.index()] |= 1 << b.sku;
            self.bundles_stored += 1;
            self.new_bundle();
        }
    }

    pub fn open_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn open_bundles(&self) -> usize {
        self.bundles.len()
    }
}
