use spir_core::compositor::Mode;
use spir_core::par::Exec;
use spir_core::protocol::{decode_frame, encode_frame};
use spir_core::session::{
    replay, run_batch, run_headless, run_pursuit, Event, Horizon, IdleOperator, Session, SessionConfig, SessionRecord,
};
use spir_core::SimTime;

fn short() -> Horizon {
    Horizon::Duration(SimTime::from_secs(20.0))
}

#[test]
fn replay_reproduces_runlog_bytes() {
    for mode in Mode::ALL {
        let original = run_pursuit(SessionConfig::for_mode(mode), short()).unwrap();
        let again = replay(&original).unwrap();
        assert_eq!(original.runlog.to_csv_string(), again.runlog.to_csv_string(), "{mode}");
        assert_eq!(original.files().unwrap(), again.files().unwrap(), "{mode}");
    }
}

#[test]
fn record_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let record = run_pursuit(SessionConfig::for_mode(Mode::Spir2), short()).unwrap();
    record.write_dir(dir.path()).unwrap();
    let back = SessionRecord::read_dir(dir.path()).unwrap();
    for ((name, a), (_, b)) in back.files().unwrap().into_iter().zip(record.files().unwrap()) {
        assert_eq!(String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap(), "{name}");
    }
    assert_eq!(back.config, record.config);
}

#[test]
fn sequential_and_parallel_batches_agree() {
    let configs: Vec<_> = Mode::ALL.iter().map(|&m| SessionConfig::for_mode(m)).collect();
    let seq = run_batch(&configs, short(), Exec::Sequential);
    let par = run_batch(&configs, short(), Exec::Parallel);
    for (a, b) in seq.into_iter().zip(par) {
        assert_eq!(a.unwrap().files().unwrap(), b.unwrap().files().unwrap());
    }
}

#[test]
fn rendering_strategies_agree() {
    let cfg = SessionConfig::for_mode(Mode::Spir2);
    let mut op = cfg.pursuit_operator().unwrap();
    let mut session = Session::new(cfg).unwrap();
    let mut compared = 0;
    while session.time() < SimTime::from_secs(8.0) {
        session.tick(&mut op);
        if let Some(d) = session.display() {
            if compared < 5 {
                assert_eq!(d.render(Exec::Sequential), d.render(Exec::Parallel));
                compared += 1;
            }
        }
    }
    assert_eq!(compared, 5);
}

#[test]
fn displayed_frames_survive_the_wire_encoding() {
    let cfg = SessionConfig::for_mode(Mode::SpirExisting);
    let mut op = cfg.pursuit_operator().unwrap();
    let mut session = Session::new(cfg).unwrap();
    while session.display().is_none() {
        session.tick(&mut op);
    }
    let frame = session.display().unwrap().render(Exec::default());
    assert_eq!(decode_frame(&encode_frame(&frame)).unwrap(), frame);
}

#[test]
fn mode_change_mid_session_is_logged() {
    let cfg = SessionConfig::for_mode(Mode::SpirExisting);
    let mut op = cfg.pursuit_operator().unwrap();
    let mut session = Session::new(cfg).unwrap();
    for _ in 0..200 {
        session.tick(&mut op);
    }
    session.set_mode(Mode::Spir2);
    for _ in 0..200 {
        session.tick(&mut op);
    }
    let r = session.into_record();
    assert!(r.events.iter().any(|e| matches!(e, Event::ModeChange { mode: Mode::Spir2, .. })));
    assert_eq!(r.runlog.samples().last().unwrap().mode, Mode::Spir2);
    assert!(r.diagnostics.iter().any(|d| d.mode == Mode::Spir2 && d.d.is_some()));
}

#[test]
fn idle_lap_run_times_out() {
    let horizon = Horizon::Laps { laps: 1, limit: SimTime::from_secs(5.0) };
    let r = run_headless(SessionConfig::for_mode(Mode::Spir2), &mut IdleOperator, horizon).unwrap();
    assert_eq!(r.laps_completed(), 0);
    assert!(matches!(r.events.last(), Some(Event::HorizonTimeout { .. })));
}

#[test]
fn seed_comes_from_environment() {
    std::env::set_var("SPIR_SEED", "42");
    let mut cfg = SessionConfig::for_mode(Mode::Spir2);
    cfg.apply_env().unwrap();
    assert_eq!(cfg.seed, 42);
    std::env::set_var("SPIR_SEED", "not a number");
    assert!(cfg.apply_env().is_err());
    std::env::remove_var("SPIR_SEED");
}
