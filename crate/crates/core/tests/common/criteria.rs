//! One check per acceptance criterion. Each returns a short summary on
//! success and the first violation on failure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensevm::asm::assemble_program;
use sensevm::bridge::{BridgeError, DriverEvent, DriverHandle};
use sensevm::event::EventKind;
use sensevm::heap::Heap;
use sensevm::runner::{run, Outcome, RunReport};
use sensevm::sim::{load_scenario, make_peripheral, DriverKind, PeripheralState, Scenario};
use sensevm::trace::TraceEvent;
use sensevm::vm::{StepOutcome, Vm};
use sensevm::{CellRef, DriverId, Program, RunConfig, Value};

use super::conc::{self, ConcProgram, GenParams};

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn blinky_program() -> Program {
    assemble_program(&read_fixture("button_blinky.asm")).expect("blinky assembles")
}

pub fn run_blinky(scenario: &str) -> (RunReport, Scenario) {
    let scenario = load_scenario(&read_fixture(scenario)).expect("scenario parses");
    (run(&blinky_program(), &scenario, &RunConfig::default()), scenario)
}

fn led_writes(report: &RunReport, led: DriverId) -> Vec<(u64, Value)> {
    report
        .trace
        .records()
        .iter()
        .filter_map(|r| match r.event {
            TraceEvent::DriverWrite { drv, val, .. } if drv == led => Some((r.time_ms, val)),
            _ => None,
        })
        .collect()
}

/// Button transitions mirrored on the LED, value for value and in order.
pub fn button_blinky_equivalence() -> Check {
    let start = Instant::now();
    let mut total = 0;
    for name in ["button_blinky.scn", "button_blinky_long.scn"] {
        let (report, scenario) = run_blinky(name);
        ensure!(report.exit_code() == 0, "{name}: {}", report.outcome);
        let led = scenario.driver_id("led0").unwrap();
        let but = scenario.driver_id("but0").unwrap();
        let presses: Vec<(u64, Value)> = scenario
            .events
            .iter()
            .filter(|e| e.driver == but)
            .map(|e| match e.action.driver_event() {
                DriverEvent::Input(v) => (e.time_ms, v),
                DriverEvent::Drain(_) => unreachable!(),
            })
            .collect();
        let writes = led_writes(&report, led);
        let values = |v: &[(u64, Value)]| v.iter().map(|p| p.1).collect::<Vec<_>>();
        ensure!(values(&writes) == values(&presses), "{name}: LED {:?} vs button {:?}", writes, presses);
        for (w, p) in writes.iter().zip(&presses) {
            ensure!(w.0 >= p.0, "{name}: LED write at {} precedes its press at {}", w.0, p.0);
        }
        ensure!(led_writes(&report, scenario.driver_id("led1").unwrap()).is_empty(), "{name}: led1 was written");
        total += writes.len();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{total} LED writes mirror the button in {elapsed:.1?}"))
}

/// No interpreter step runs while nothing is runnable.
pub fn no_busy_poll() -> Check {
    let (report, _) = run_blinky("button_blinky_long.scn");
    ensure!(report.stats.idle_steps == 0, "{} idle steps", report.stats.idle_steps);
    let mut asleep_at = None;
    let mut sleeps = 0;
    for ev in report.trace.events() {
        match *ev {
            TraceEvent::Sleep { steps } => {
                asleep_at = Some(steps);
                sleeps += 1;
            }
            TraceEvent::Wake { steps, .. } => {
                let s = asleep_at.take().ok_or("wake without sleep")?;
                ensure!(steps == s, "{} steps ran while asleep", steps - s);
            }
            _ => {}
        }
    }
    ensure!(sleeps > 0, "the VM never slept");
    ensure!(
        report.stats.steps == report.stats.contexts.iter().map(|c| c.instructions).sum::<u64>(),
        "step count not conserved"
    );
    Ok(format!("{sleeps} sleeps, 0 steps while asleep, {} steps total", report.stats.steps))
}

pub fn configuration_fidelity() -> Check {
    let (report, _) = run_blinky("button_blinky.scn");
    ensure!(report.stats.channels_in_use == 2, "{} channels in use", report.stats.channels_in_use);
    let text = report.summary();
    for want in [
        "heap: 1024 B (128 cells x 8 B)",
        "stacks: 1024 B x 4 contexts (128 slots each)",
        "channels: 100 x 96 B = 9600 B arena, 2 in use = 192 B, 9408 B unused",
        "drivers: 16 slots",
    ] {
        ensure!(text.contains(want), "report lacks `{want}`:\n{text}");
    }
    Ok("1024 B heap, 1024 B x 4 stacks, 100 x 96 B channels (2 = 192 B), 16 drivers".into())
}

fn rendezvous_case(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = GenParams {
        max_branches: if seed.is_multiple_of(2) { 1 } else { 3 },
        wraps: seed % 2 == 1,
        ..GenParams::default()
    };
    let prog = conc::generate(&mut rng, params);
    let config = RunConfig { heap_bytes: 4096, ..RunConfig::default() };
    let report = prog.run(&config);
    let want = conc::model(&prog);
    conc::blocked_contexts(&report).map_err(|e| format!("seed {seed}: {e}\n{}", prog.to_asm()))?;
    let got = conc::transfers(&report);
    ensure!(got == want.transfers, "seed {seed}: transfers {got:?}, model {:?}\n{}", want.transfers, prog.to_asm());
    let finished = conc::finished_contexts(&report);
    let mut want_finished = want.finished.clone();
    want_finished.sort();
    ensure!(finished == want_finished, "seed {seed}: finished {finished:?}, model {want_finished:?}");
    let s = &report.stats;
    let wraps: u64 = s.contexts.iter().map(|c| c.wraps_run).sum();
    ensure!(
        wraps == 2 * s.sched.rendezvous + s.sched.driver_writes + s.sched.driver_reads + s.sched.deliveries,
        "seed {seed}: {wraps} resumptions for {} rendezvous",
        s.sched.rendezvous
    );
    Ok(got.len())
}

/// Transfer logs equal the reference model's on random programs.
pub fn rendezvous_oracle() -> Check {
    let start = Instant::now();
    let mut transfers = 0;
    for seed in 0..500 {
        transfers += rendezvous_case(seed)?;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("500 programs agree with the model ({transfers} transfers) in {elapsed:.1?}"))
}

/// Returns the wraps fired and the dirty queue entries discarded.
fn choose_case(seed: u64) -> Result<(usize, u64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC400_0000 + seed);
    let params = GenParams { max_branches: 5, wraps: true, ..GenParams::default() };
    let prog = conc::generate(&mut rng, params);
    let config = RunConfig { heap_bytes: 8192, ..RunConfig::default() };
    let report = prog.run(&config);
    conc::blocked_contexts(&report).map_err(|e| format!("case {seed}: {e}"))?;
    // tag -> (context, sync index)
    let mut owner = BTreeMap::new();
    for (c, syncs) in prog.contexts.iter().enumerate() {
        for (i, branches) in syncs.iter().enumerate() {
            for b in branches {
                owner.insert(b.tag, (c as u32, i));
            }
        }
    }
    let mut per_sync: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    let mut got = Vec::new();
    for (ctx, tag) in conc::wrap_log(&report) {
        let Some(&(c, i)) = owner.get(&tag) else { return Err(format!("case {seed}: unknown wrap tag {tag}")) };
        ensure!(c == ctx, "case {seed}: wrap {tag} of context {c} ran in context {ctx}");
        *per_sync.entry((c, i)).or_default() += 1;
        got.push((c, i, tag));
    }
    for (&(c, i), &n) in &per_sync {
        ensure!(n == 1, "case {seed}: sync {i} of context {c} ran {n} wraps");
    }
    got.sort();
    let want = conc::model(&prog);
    ensure!(got == want.fired, "case {seed}: fired {got:?}, model {:?}\n{}", want.fired, prog.to_asm());
    Ok((got.len(), report.stats.sched.purged))
}

/// At most one branch of a choose ever fires, and it is the model's branch.
pub fn choose_exclusivity() -> Check {
    let (mut fired, mut purged) = (0, 0);
    for seed in 0..1000 {
        let (f, p) = choose_case(seed)?;
        fired += f;
        purged += p;
    }
    // dirty entries must actually occur for skipping them to be tested
    ensure!(purged > 0, "no dirty entry was ever discarded");
    Ok(format!("1000 cases, {fired} wraps fired, each sync exactly once, {purged} dirty entries skipped"))
}

/// Builds `choose [wrap b1 w1, wrap (choose [wrap b2 w2, wrap b3 w3]) w4]`
/// and syncs it against a sender on channel `ch`.
pub fn rewrite_program(ch: usize, v: i32) -> String {
    format!(
        ".const v {v}
.const one 1
.const two 2
.const three 3
.const ten 10
main:
  CLEAR
  PUSH
  CHANNEL
  CONS
  PUSH
  CHANNEL
  CONS
  PUSH
  CHANNEL
  CONS
  PUSH
  SPAWN sender
  POP
  PUSH
  ACC 2
  RECVEVT
  PUSH
  COMB w1
  WRAP
  SWAP
  PUSH
  ACC 1
  RECVEVT
  PUSH
  COMB w2
  WRAP
  SWAP
  PUSH
  ACC 0
  RECVEVT
  PUSH
  COMB w3
  WRAP
  SWAP
  POP
  CHOOSE
  PUSH
  COMB w4
  WRAP
  CHOOSE
  SYNC
  STOP
sender:
  ACC {acc}
  PUSH
  LOADI v
  SENDEVT
  SYNC
  STOP
w1:
  ACC 0
  PUSH
  LOADI one
  ADD
  RETURN
w2:
  ACC 0
  PUSH
  LOADI two
  MUL
  RETURN
w3:
  ACC 0
  PUSH
  LOADI three
  SUB
  RETURN
w4:
  ACC 0
  PUSH
  LOADI ten
  MUL
  RETURN
",
        acc = 3 - ch
    )
}

pub fn run_to_end(program: Program, config: RunConfig) -> Result<Vm, String> {
    let mut vm = Vm::new(program, config).map_err(|e| e.to_string())?;
    loop {
        match vm.step().map_err(|e| e.to_string())? {
            StepOutcome::Halted | StepOutcome::AllAsleep => return Ok(vm),
            _ => {}
        }
    }
}

/// The nested choose/wrap example flattens to three records with composed
/// wraps, and each branch computes the composed function.
pub fn choose_wrap_canonicalization() -> Check {
    // structural: drive the combinators directly
    let src = rewrite_program(0, 0);
    let mut vm = Vm::new(assemble_program(&src).unwrap(), RunConfig::default()).map_err(|e| e.to_string())?;
    let mut w = Vec::new();
    for _ in 0..4 {
        let l = w.len() as u32;
        w.push(Value::Closure(vm.alloc(Value::Label(l), Value::Unit).map_err(|e| e.to_string())?));
    }
    let ch: Vec<_> = (0..3).map(|_| vm.channel().unwrap()).collect();
    let b: Vec<Value> = ch.iter().map(|&c| vm.recv_evt(c).unwrap()).collect();
    let wb1 = vm.wrap(b[0], w[0]).unwrap();
    let wb2 = vm.wrap(b[1], w[1]).unwrap();
    let wb3 = vm.wrap(b[2], w[2]).unwrap();
    let inner = vm.choose(wb2, wb3).unwrap();
    let outer = vm.wrap(inner, w[3]).unwrap();
    let e = vm.choose(wb1, outer).unwrap();
    let list = vm.base_events(e).unwrap();
    ensure!(list.len() == 3, "flattened to {} records", list.len());
    ensure!(list.iter().map(|x| x.channel).collect::<Vec<_>>() == ch, "channel order {:?}", list);
    ensure!(list.iter().all(|x| x.kind == EventKind::Recv), "kinds {:?}", list);
    ensure!(list[0].wrap == w[0], "first wrap {:?}", list[0].wrap);
    for (i, inner_w) in [(1, w[1]), (2, w[2])] {
        let Value::Composed(c) = list[i].wrap else { return Err(format!("record {i} wrap {:?}", list[i].wrap)) };
        ensure!(vm.heap().fst(c) == w[3] && vm.heap().snd(c) == inner_w, "record {i} is not w4 after w{}", i + 1);
    }

    // observational: the composed wrap runs on the transferred value
    let v = 7;
    let direct = [v + 1, (v * 2) * 10, (v - 3) * 10];
    for (i, want) in direct.iter().enumerate() {
        let program = assemble_program(&rewrite_program(i, v)).map_err(|e| e.to_string())?;
        let vm = run_to_end(program, RunConfig::default())?;
        ensure!(vm.main_result() == Some(Value::Int(*want)), "branch {i}: {:?}, want {want}", vm.main_result());
    }
    Ok(format!("[b1 w1, b2 (w4.w2), b3 (w4.w3)]; branches yield {direct:?}"))
}

/// Random graph in a fresh heap: returns the heap and its roots.
pub fn random_graph(rng: &mut ChaCha8Rng) -> (Heap, Vec<Value>) {
    let capacity = 64;
    let mut heap = Heap::with_capacity(capacity);
    let n = rng.gen_range(1..=capacity);
    let cells: Vec<CellRef> = (0..n).map(|_| heap.alloc(Value::Unit, Value::Unit, |_| {}).unwrap()).collect();
    let random_value = |rng: &mut ChaCha8Rng| -> Value {
        let r = cells[rng.gen_range(0..n)];
        match rng.gen_range(0..8) {
            0 => Value::Unit,
            1 => Value::Int(rng.gen()),
            2 => Value::Closure(r),
            3 => Value::Event(r),
            4 => Value::Composed(r),
            _ => Value::Cell(r),
        }
    };
    for &c in &cells {
        let (a, b) = (random_value(rng), random_value(rng));
        heap.set_fst(c, a);
        heap.set_snd(c, b);
        heap.set_flag(c, rng.gen());
    }
    let roots = (0..rng.gen_range(0..4)).map(|_| random_value(rng)).collect();
    (heap, roots)
}

pub fn reachable(heap: &Heap, roots: &[Value]) -> BTreeSet<u32> {
    fn visit(heap: &Heap, v: Value, seen: &mut BTreeSet<u32>) {
        if let Some(r) = v.cell_ref() {
            if seen.insert(r.0) {
                visit(heap, heap.fst(r), seen);
                visit(heap, heap.snd(r), seen);
            }
        }
    }
    let mut seen = BTreeSet::new();
    for &r in roots {
        visit(heap, r, &mut seen);
    }
    seen
}

pub fn marker_matches_oracle(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6C00 + seed);
    let (mut heap, roots) = random_graph(&mut rng);
    let before: Vec<(Value, Value, bool)> = (0..heap.capacity() as u32)
        .map(|i| {
            let c = heap.cell(CellRef(i));
            (c.fst, c.snd, c.flag)
        })
        .collect();
    let want = reachable(&heap, &roots);
    let marked = heap.mark(&roots);
    ensure!(marked == want.len(), "graph {seed}: marked {marked}, oracle {}", want.len());
    for i in 0..heap.capacity() as u32 {
        let c = heap.cell(CellRef(i));
        ensure!(c.mark == want.contains(&i), "graph {seed}: cell {i} mark {}", c.mark);
        ensure!((c.fst, c.snd, c.flag) == before[i as usize], "graph {seed}: cell {i} not restored");
    }
    Ok(())
}

/// Allocation-heavy generated programs whose observable trace must not
/// depend on heap size.
pub fn gc_program(seed: u64) -> ConcProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7B00 + seed);
    let params = GenParams {
        max_branches: 2,
        wraps: seed.is_multiple_of(2),
        filler: 40 + (seed as u32 % 5) * 10,
        ..GenParams::default()
    };
    loop {
        let p = conc::generate(&mut rng, params);
        if conc::model(&p).transfers.len() >= 2 {
            return p;
        }
    }
}

fn observable(report: &RunReport) -> Vec<String> {
    report.trace.observable().map(|r| r.to_string()).collect()
}

/// 768 B heap (96 cells) against four times that.
pub const GC_SMALL_HEAP: usize = 768;

pub fn gc_transparency_case(seed: u64) -> Result<u64, String> {
    let p = gc_program(seed);
    let small = p.run(&RunConfig { heap_bytes: GC_SMALL_HEAP, ..RunConfig::default() });
    let large = p.run(&RunConfig { heap_bytes: 4 * GC_SMALL_HEAP, ..RunConfig::default() });
    for r in [&small, &large] {
        if let Outcome::Fault(e) = &r.outcome {
            return Err(format!("program {seed}: {e}"));
        }
    }
    ensure!(small.stats.collections > 0, "program {seed} never collected");
    ensure!(small.outcome == large.outcome, "program {seed}: {} vs {}", small.outcome, large.outcome);
    ensure!(observable(&small) == observable(&large), "program {seed}: observable traces differ");
    ensure!(!observable(&small).is_empty(), "program {seed} has no observable events");
    Ok(small.stats.collections)
}

/// A loop allocating a 50-cell chain per iteration in a 64-cell heap.
pub fn garbage_loop_program() -> String {
    ".const n 50
.const zero 0
.const one 1
main:
  CLEAR
loop:
  PUSH
  LOADI n
count:
  PUSH
  PUSH
  LOADI zero
  SWAP
  LT
  GOTOFALSE next
  SWAP
  PUSH
  CONS
  SWAP
  PUSH
  LOADI one
  SUB
  GOTO count
next:
  POP
  CLEAR
  GOTO loop
"
    .to_string()
}

pub fn long_run_small_heap() -> Result<String, String> {
    let program = assemble_program(&garbage_loop_program()).map_err(|e| e.to_string())?;
    let config = RunConfig { heap_bytes: 64 * 8, max_steps: Some(1_000_000), ..RunConfig::default() };
    let report = run(&program, &Scenario::default(), &config);
    ensure!(report.outcome == Outcome::MaxSteps(1_000_000), "outcome {}", report.outcome);
    ensure!(report.stats.collections > 1000, "only {} collections", report.stats.collections);
    Ok(format!("{} collections, {} cells reclaimed", report.stats.collections, report.stats.cells_reclaimed))
}

pub fn gc_correctness() -> Check {
    for seed in 0..200 {
        marker_matches_oracle(seed)?;
    }
    let mut collections = 0;
    for seed in 0..20 {
        collections += gc_transparency_case(seed)?;
    }
    let long = long_run_small_heap()?;
    Ok(format!("200 graphs match; 20 programs transparent at {GC_SMALL_HEAP} B vs 4x ({collections} collections); 10^6 steps in 64 cells: {long}"))
}

fn random_datum(rng: &mut ChaCha8Rng) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::Unit,
        1 => Value::Bool(rng.gen()),
        _ => Value::Int(rng.gen_range(-2..300)),
    }
}

/// Exercises all five interface operations plus interrupts on one driver.
pub fn driver_totality_case(kind: DriverKind, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buffer = rng.gen_range(1..16);
    let mut h = DriverHandle::new(DriverId(0), "d", make_peripheral(kind, buffer));
    let sync = h.ll_is_synchronous();
    ensure!(sync == (kind == DriverKind::Led), "{kind}: is_synchronous {sync}");
    for _ in 0..rng.gen_range(1..60) {
        let (readable, writeable) = (h.ll_data_readable(), h.ll_data_writeable());
        if sync {
            ensure!(readable > 0 && writeable > 0, "{kind}: synchronous driver not ready");
        }
        ensure!(h.ll_is_synchronous() == sync, "{kind}: is_synchronous changed");
        match rng.gen_range(0..4) {
            0 => match h.ll_read() {
                Ok(_) => ensure!(readable > 0, "{kind}: read succeeded with readable 0"),
                Err(BridgeError::NotReadable(_)) => {
                    ensure!(readable == 0, "{kind}: NotReadable with readable {readable}")
                }
                Err(e) => return Err(format!("{kind}: read: {e}")),
            },
            1 => {
                let d = random_datum(&mut rng);
                match h.ll_write(d) {
                    Ok(n) => ensure!(n == 1 && writeable > 0, "{kind}: write accepted {n} with writeable {writeable}"),
                    Err(BridgeError::NotWriteable(_)) => {
                        ensure!(writeable == 0, "{kind}: NotWriteable with {writeable}")
                    }
                    Err(BridgeError::BadDatum { .. }) => {}
                    Err(e) => return Err(format!("{kind}: write: {e}")),
                }
            }
            2 => {
                let _ = h.interrupt(&DriverEvent::Input(random_datum(&mut rng)));
            }
            _ => {
                let _ = h.interrupt(&DriverEvent::Drain(rng.gen_range(0..10)));
            }
        }
        if let PeripheralState::Uart { buffered, capacity, written, drained, .. } = h.state() {
            ensure!(
                written == drained + buffered as u64,
                "uart: {written} written, {drained} drained, {buffered} buffered"
            );
            ensure!(h.ll_data_writeable() as usize == capacity - buffered, "uart: writeable mismatch");
        }
    }
    Ok(())
}

pub fn uart_conservation_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A27 + seed);
    let cap = rng.gen_range(1..=16);
    let mut h = DriverHandle::new(DriverId(0), "uart", make_peripheral(DriverKind::Uart, cap));
    let mut model_buffered = 0usize;
    for _ in 0..rng.gen_range(1..100) {
        if rng.gen_bool(0.6) {
            let ok = h.ll_write(Value::Int(rng.gen_range(0..256))).is_ok();
            ensure!(ok == (model_buffered < cap), "case {seed}: write {ok} with {model_buffered}/{cap} buffered");
            model_buffered += ok as usize;
        } else {
            let n = rng.gen_range(0..6u32);
            h.interrupt(&DriverEvent::Drain(n)).map_err(|v| format!("drain latched {v}"))?;
            model_buffered -= model_buffered.min(n as usize);
        }
        let PeripheralState::Uart { buffered, written, drained, .. } = h.state() else { unreachable!() };
        ensure!(buffered == model_buffered, "case {seed}: buffered {buffered}, model {model_buffered}");
        ensure!(written == drained + buffered as u64, "case {seed}: {written} != {drained} + {buffered}");
    }
    Ok(())
}

pub fn bridge_conformance() -> Check {
    for seed in 0..500 {
        for kind in [DriverKind::Led, DriverKind::Button, DriverKind::Uart] {
            driver_totality_case(kind, seed)?;
        }
        uart_conservation_case(seed)?;
    }
    Ok("3 drivers x 500 totality runs, 500 UART conservation runs".into())
}

/// Everything run by the other criteria, rendered three times.
pub fn fixture_traces() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for name in ["button_blinky.scn", "button_blinky_long.scn"] {
        out.push((name.to_string(), run_blinky(name).0.trace.render()));
    }
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = conc::generate(&mut rng, GenParams { max_branches: 3, wraps: true, ..GenParams::default() });
        out.push((
            format!("random program {seed}"),
            p.run(&RunConfig { heap_bytes: 4096, ..RunConfig::default() }).trace.render(),
        ));
    }
    for seed in 0..20 {
        let p = gc_program(seed);
        out.push((
            format!("gc program {seed}"),
            p.run(&RunConfig { heap_bytes: GC_SMALL_HEAP, ..RunConfig::default() }).trace.render(),
        ));
    }
    for ch in 0..3 {
        let program = assemble_program(&rewrite_program(ch, 7)).unwrap();
        out.push((
            format!("rewrite branch {ch}"),
            run(&program, &Scenario::default(), &RunConfig::default()).trace.render(),
        ));
    }
    out
}

pub fn determinism() -> Check {
    let runs: Vec<Vec<(String, String)>> = (0..3).map(|_| fixture_traces()).collect();
    for i in 0..runs[0].len() {
        let (name, first) = &runs[0][i];
        for other in &runs[1..] {
            ensure!(&other[i].1 == first, "{name}: traces differ between runs");
        }
    }
    let bytes: usize = runs[0].iter().map(|(_, t)| t.len()).sum();
    Ok(format!("{} fixtures x 3 runs byte-identical ({bytes} trace bytes each)", runs[0].len()))
}
