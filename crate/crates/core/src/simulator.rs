//! Discrete-event simulation of the tandem system.
//!
//! Sensors emit Poisson packet streams. The processor serves packets
//! non-preemptively, always taking the head of the highest-priority
//! non-empty class queue; service is deterministic per class. Processed
//! packets join a FCFS transmission queue whose service times are drawn from
//! the Rayleigh fading law.
//!
//! Random streams: all generators are ChaCha8 seeded from the master seed.
//! Stream `0` drives the fading draws, stream `j` (1-based) drives the
//! arrivals of sensor `j`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{mean_snr, ChannelConfig, RateVector, SystemConfig, MIN_FADING_GAIN};

/// Runs stop and are flagged as saturated beyond this many packets in flight.
pub const SATURATION_LIMIT: usize = 1_000_000;

const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    /// Measured deliveries per sensor after warm-up.
    pub packets_per_sensor: usize,
    /// Deliveries discarded per sensor before measuring.
    pub warmup_packets: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            packets_per_sensor: 1_000_000,
            warmup_packets: 1_000,
        }
    }
}

/// Lifecycle timestamps of one packet. Stages not yet reached are `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    /// 1-based sensor index.
    pub sensor: usize,
    pub arrival_time: f64,
    pub processing_start: f64,
    pub processing_end: f64,
    pub transmission_start: f64,
    pub departure_time: f64,
}

impl Packet {
    fn arrived(sensor: usize, at: f64) -> Self {
        Self {
            sensor,
            arrival_time: at,
            processing_start: f64::INFINITY,
            processing_end: f64::INFINITY,
            transmission_start: f64::INFINITY,
            departure_time: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorStats {
    pub mean_paoi: f64,
    /// Batch-means standard error of `mean_paoi`.
    pub paoi_stderr: f64,
    pub mean_processing_wait: f64,
    pub mean_transmission_wait: f64,
    /// PAoI samples behind the means.
    pub samples: usize,
    /// All deliveries, warm-up included.
    pub delivered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStats {
    pub sensors: Vec<SensorStats>,
    /// Set when the run was cut short by [`SATURATION_LIMIT`].
    pub saturated: bool,
    pub end_time: f64,
}

/// Fading-channel service law: `ξ_j / ln(1 + snr·h)`, `h ~ Exp(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingLaw {
    pub xi: Vec<f64>,
    pub mean_snr: f64,
}

/// Service description of the tandem queue, one entry per class.
#[derive(Debug, Clone, PartialEq)]
pub struct TandemModel {
    pub processing: Vec<f64>,
    /// `None` makes transmission instantaneous.
    pub transmission: Option<FadingLaw>,
}

impl TandemModel {
    pub fn from_config(config: &SystemConfig) -> Self {
        let channel = config.channel();
        Self {
            processing: config.processing_times(),
            transmission: Some(FadingLaw {
                xi: config
                    .sensors()
                    .iter()
                    .map(|s| channel.xi(s.processed_size_bits))
                    .collect(),
                mean_snr: mean_snr(&channel),
            }),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.processing.len()
    }
}

/// Maps a uniform draw in `[0, 1)` to a transmission time.
pub fn transmission_time_from_draw(xi: f64, snr: f64, draw: f64) -> f64 {
    let gain = (-(-draw).ln_1p()).max(MIN_FADING_GAIN);
    xi / (snr * gain).ln_1p()
}

/// Transmission time of a `processed_size_bits` packet for one uniform draw.
pub fn sample_transmission_time(channel: &ChannelConfig, processed_size_bits: f64, draw: f64) -> f64 {
    transmission_time_from_draw(channel.xi(processed_size_bits), mean_snr(channel), draw)
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival(usize),
    ProcessingDone,
    TransmissionDone,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

struct Accumulator {
    paoi: Vec<f64>,
    processing_wait: f64,
    transmission_wait: f64,
    delivered: usize,
    previous_arrival: Option<f64>,
}

impl Accumulator {
    fn finish(self) -> SensorStats {
        let n = self.paoi.len();
        let (mean, stderr) = mean_and_stderr(&self.paoi);
        let denom = if n == 0 { f64::NAN } else { n as f64 };
        SensorStats {
            mean_paoi: mean,
            paoi_stderr: stderr,
            mean_processing_wait: self.processing_wait / denom,
            mean_transmission_wait: self.transmission_wait / denom,
            samples: n,
            delivered: self.delivered,
        }
    }
}

/// Mean and batch-means standard error (plain i.i.d. error below 2 batches' worth).
fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let (units, count) = if n >= 2 * BATCHES {
        let size = n / BATCHES;
        let means: Vec<f64> = xs
            .chunks_exact(size)
            .take(BATCHES)
            .map(|c| c.iter().sum::<f64>() / size as f64)
            .collect();
        (means, BATCHES)
    } else {
        (xs.to_vec(), n)
    };
    let m = units.iter().sum::<f64>() / count as f64;
    let var = units.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

struct Engine<'a> {
    model: &'a TandemModel,
    rates: &'a [f64],
    sim: SimConfig,
    now: f64,
    seq: u64,
    events: BinaryHeap<Reverse<Event>>,
    arrival_rngs: Vec<ChaCha8Rng>,
    fading_rng: ChaCha8Rng,
    slab: Vec<Packet>,
    free: Vec<usize>,
    class_queues: Vec<VecDeque<usize>>,
    in_processing: Option<usize>,
    tx_queue: VecDeque<usize>,
    in_transmission: Option<usize>,
    in_flight: usize,
    acc: Vec<Accumulator>,
    trace: Option<Vec<Packet>>,
}

impl<'a> Engine<'a> {
    fn new(model: &'a TandemModel, rates: &'a [f64], sim: SimConfig, traced: bool) -> Self {
        let n = model.num_classes();
        Self {
            model,
            rates,
            sim,
            now: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
            arrival_rngs: (1..=n as u64).map(|j| stream(sim.seed, j)).collect(),
            fading_rng: stream(sim.seed, 0),
            slab: Vec::new(),
            free: Vec::new(),
            class_queues: vec![VecDeque::new(); n],
            in_processing: None,
            tx_queue: VecDeque::new(),
            in_transmission: None,
            in_flight: 0,
            acc: (0..n)
                .map(|_| Accumulator {
                    paoi: Vec::with_capacity(sim.packets_per_sensor.min(1 << 20)),
                    processing_wait: 0.0,
                    transmission_wait: 0.0,
                    delivered: 0,
                    previous_arrival: None,
                })
                .collect(),
            trace: traced.then(Vec::new),
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse(Event { time, seq: self.seq, kind }));
    }

    fn schedule_arrival(&mut self, class: usize) {
        let dt = exp_sample(&mut self.arrival_rngs[class], self.rates[class]);
        self.schedule(self.now + dt, EventKind::Arrival(class));
    }

    fn alloc(&mut self, packet: Packet) -> usize {
        self.in_flight += 1;
        match self.free.pop() {
            Some(id) => {
                self.slab[id] = packet;
                id
            }
            None => {
                self.slab.push(packet);
                self.slab.len() - 1
            }
        }
    }

    fn start_processing(&mut self) {
        if self.in_processing.is_some() {
            return;
        }
        let Some(id) = self.class_queues.iter_mut().find_map(|q| q.pop_front()) else {
            return;
        };
        let p = &mut self.slab[id];
        p.processing_start = self.now;
        p.processing_end = self.now + self.model.processing[p.sensor - 1];
        let end = p.processing_end;
        self.in_processing = Some(id);
        self.schedule(end, EventKind::ProcessingDone);
    }

    fn start_transmission(&mut self) {
        if self.in_transmission.is_some() {
            return;
        }
        let Some(id) = self.tx_queue.pop_front() else {
            return;
        };
        let duration = match &self.model.transmission {
            Some(law) => {
                let draw: f64 = self.fading_rng.random();
                transmission_time_from_draw(law.xi[self.slab[id].sensor - 1], law.mean_snr, draw)
            }
            None => 0.0,
        };
        let p = &mut self.slab[id];
        p.transmission_start = self.now;
        p.departure_time = self.now + duration;
        let end = p.departure_time;
        self.in_transmission = Some(id);
        self.schedule(end, EventKind::TransmissionDone);
    }

    fn deliver(&mut self, id: usize) {
        let p = self.slab[id];
        self.free.push(id);
        self.in_flight -= 1;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(p);
        }
        let quota = self.sim.packets_per_sensor;
        let warmup = self.sim.warmup_packets;
        let acc = &mut self.acc[p.sensor - 1];
        acc.delivered += 1;
        if let Some(prev) = acc.previous_arrival {
            if acc.delivered > warmup && acc.paoi.len() < quota {
                let inter_arrival = p.arrival_time - prev;
                let system_time = p.departure_time - p.arrival_time;
                acc.paoi.push(inter_arrival + system_time);
                acc.processing_wait += p.processing_start - p.arrival_time;
                acc.transmission_wait += p.transmission_start - p.processing_end;
            }
        }
        acc.previous_arrival = Some(p.arrival_time);
    }

    fn done(&self) -> bool {
        self.acc.iter().all(|a| a.paoi.len() >= self.sim.packets_per_sensor)
    }

    fn run(mut self) -> (SimulationStats, Option<Vec<Packet>>) {
        for class in 0..self.model.num_classes() {
            self.schedule_arrival(class);
        }
        let mut saturated = false;
        while !self.done() {
            let Some(Reverse(ev)) = self.events.pop() else { break };
            self.now = ev.time;
            match ev.kind {
                EventKind::Arrival(class) => {
                    let id = self.alloc(Packet::arrived(class + 1, self.now));
                    self.class_queues[class].push_back(id);
                    self.schedule_arrival(class);
                    self.start_processing();
                    if self.in_flight > SATURATION_LIMIT {
                        saturated = true;
                        break;
                    }
                }
                EventKind::ProcessingDone => {
                    let id = self.in_processing.take().expect("processor busy");
                    self.tx_queue.push_back(id);
                    self.start_processing();
                    self.start_transmission();
                }
                EventKind::TransmissionDone => {
                    let id = self.in_transmission.take().expect("transmitter busy");
                    self.deliver(id);
                    self.start_transmission();
                }
            }
        }
        let end_time = self.now;
        let trace = self.trace.take().map(|mut delivered| {
            // packets still inside the system, in arrival order
            let mut pending: Vec<Packet> = self
                .in_processing
                .iter()
                .chain(self.in_transmission.iter())
                .chain(self.tx_queue.iter())
                .chain(self.class_queues.iter().flatten())
                .map(|&id| self.slab[id])
                .collect();
            pending.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time));
            delivered.extend(pending);
            delivered
        });
        let stats = SimulationStats {
            sensors: self.acc.into_iter().map(Accumulator::finish).collect(),
            saturated,
            end_time,
        };
        (stats, trace)
    }
}

fn check_inputs(model: &TandemModel, rates: &RateVector, sim: &SimConfig) -> Result<()> {
    rates.check(model.num_classes(), true)?;
    if sim.packets_per_sensor == 0 {
        return Err(Error::InvalidConfig("packets_per_sensor must be positive".into()));
    }
    Ok(())
}

pub fn run_model(model: &TandemModel, rates: &RateVector, sim: SimConfig) -> Result<SimulationStats> {
    check_inputs(model, rates, &sim)?;
    Ok(Engine::new(model, rates.as_slice(), sim, false).run().0)
}

/// Like [`run_model`], also returning every packet: delivered ones in
/// delivery order, then those still in the system at the end.
pub fn run_traced(
    model: &TandemModel,
    rates: &RateVector,
    sim: SimConfig,
) -> Result<(SimulationStats, Vec<Packet>)> {
    check_inputs(model, rates, &sim)?;
    let (stats, trace) = Engine::new(model, rates.as_slice(), sim, true).run();
    Ok((stats, trace.unwrap_or_default()))
}

pub fn run(config: &SystemConfig, rates: &RateVector, sim: SimConfig) -> Result<SimulationStats> {
    run_model(&TandemModel::from_config(config), rates, sim)
}
