use navtune::intervention::{load_log, parse_log, write_log, InterventionType};
use navtune::robot::Action;
use navtune::sim::Sim;
use navtune::world::{force_border, OccupancyGrid, World};
use navtune_teleop::protocol::{ClientCommand as C, EnvSource, ErrorCode, Payload, Phase, SessionMessage};
use navtune_teleop::{replay, replay_file, CommandLog, LoadedEnv, Outputs, Teleop, TeleopConfig};
use proptest::prelude::*;

fn open_grid() -> OccupancyGrid {
    let mut g = OccupancyGrid::new(24, 24, 0.15).unwrap();
    force_border(&mut g);
    g
}

fn open_env() -> LoadedEnv {
    let source = EnvSource::Grid {
        text: open_grid().to_text(),
        name: Some("open".into()),
    };
    LoadedEnv::load(&source, 0.15).unwrap()
}

fn teleop() -> Teleop {
    Teleop::new(open_env(), TeleopConfig::default()).unwrap()
}

fn run(t: &mut Teleop, n: usize) -> Vec<SessionMessage> {
    (0..n).flat_map(|_| t.tick()).collect()
}

fn error_of(msgs: &[SessionMessage]) -> (ErrorCode, Vec<String>) {
    assert_eq!(msgs.len(), 1, "{msgs:?}");
    match &msgs[0].payload {
        Payload::Error { code, expected, .. } => (*code, expected.clone()),
        p => panic!("expected an error frame, got {p:?}"),
    }
}

fn accepted(msgs: &[SessionMessage]) {
    assert!(
        msgs.iter().all(|m| m.kind() != "error"),
        "command rejected: {msgs:?}"
    );
}

#[test]
fn idle_session_streams_autopilot_state() {
    let mut t = teleop();
    let msgs = run(&mut t, 20);
    let states: Vec<_> = msgs
        .iter()
        .filter_map(|m| match &m.payload {
            Payload::State(s) => Some(s.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(states.len(), 20);
    assert!(msgs.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    assert!(states.iter().all(|s| s.phase == Phase::Running && s.controller.is_none()));
    let first = states[0].pose;
    let last = states.last().unwrap().pose;
    assert!((last[1] - first[1]) > 0.2, "autopilot moved {first:?} -> {last:?}");
    assert!(msgs.iter().any(|m| m.kind() == "scan_frame"));
}

#[test]
fn pause_stops_simulated_time() {
    let mut t = teleop();
    run(&mut t, 5);
    accepted(&t.handle(1, C::Pause));
    let (time, tick, ticks) = (t.time(), t.sim_tick(), t.ticks());
    let frames = run(&mut t, 30);
    assert_eq!((t.time(), t.sim_tick(), t.ticks()), (time, tick, ticks));
    assert!(frames.iter().all(|m| match &m.payload {
        Payload::State(s) => s.t == time && s.phase == Phase::Paused,
        _ => true,
    }));
    accepted(&t.handle(1, C::Start));
    run(&mut t, 1);
    assert!(t.time() > time);
}

#[test]
fn protocol_violations_name_the_expected_state() {
    let mut t = teleop();
    let (code, expected) = error_of(&t.handle(1, C::MarkEnd { itype: InterventionType::TypeA }));
    assert_eq!(code, ErrorCode::ProtocolViolation);
    assert_eq!(expected, vec!["mark_open"]);
    let (code, expected) = error_of(&t.handle(1, C::Drive { v: 0.3, w: 0.0 }));
    assert_eq!(code, ErrorCode::ProtocolViolation);
    assert_eq!(expected, vec!["controlling"]);
    let (code, _) = error_of(&t.handle(1, C::Start));
    assert_eq!(code, ErrorCode::ProtocolViolation);
    let (code, _) = error_of(&t.handle(1, C::RewindTo { t: 0.0 }));
    assert_eq!(code, ErrorCode::ProtocolViolation);
    let (code, expected) = error_of(&t.handle(1, C::SaveRecord));
    assert_eq!((code, expected), (ErrorCode::ProtocolViolation, vec!["mark_closed".to_string()]));
    let (code, _) = error_of(&t.handle(1, C::Hello { version: 99 }));
    assert_eq!(code, ErrorCode::Version);
    assert!(t.command_log().entries.is_empty());
}

#[test]
fn control_is_exclusive() {
    let mut t = teleop();
    accepted(&t.handle(1, C::TakeControl));
    let (code, _) = error_of(&t.handle(2, C::TakeControl));
    assert_eq!(code, ErrorCode::ControlHeld);
    let (code, _) = error_of(&t.handle(2, C::Drive { v: 0.1, w: 0.0 }));
    assert_eq!(code, ErrorCode::ProtocolViolation);
    assert!(t.disconnect(2).is_empty());
    accepted(&t.disconnect(1));
    assert_eq!(t.controller(), None);
    accepted(&t.handle(2, C::TakeControl));
}

#[test]
fn rewind_beyond_ring_is_out_of_window() {
    let config = TeleopConfig {
        ring_steps: 20,
        ..TeleopConfig::default()
    };
    let mut t = Teleop::new(open_env(), config).unwrap();
    run(&mut t, 30);
    accepted(&t.handle(1, C::Pause));
    let (code, _) = error_of(&t.handle(1, C::RewindTo { t: 0.5 }));
    assert_eq!(code, ErrorCode::OutOfWindow);
    let (code, _) = error_of(&t.handle(1, C::RewindTo { t: 99.0 }));
    assert_eq!(code, ErrorCode::OutOfWindow);
    let now = t.time();
    accepted(&t.handle(1, C::RewindTo { t: now - 0.5 }));
    assert!((t.time() - (now - 0.5)).abs() < 1e-9);
}

#[test]
fn manual_drive_matches_headless_simulation() {
    let mut t = teleop();
    accepted(&t.handle(1, C::TakeControl));
    accepted(&t.handle(1, C::Drive { v: 0.3, w: 0.0 }));
    run(&mut t, 20);
    accepted(&t.handle(1, C::ReleaseControl));

    let world = World::with_default_endpoints(open_grid());
    let mut sim = Sim::new(world, TeleopConfig::default().sim, 0).unwrap();
    for _ in 0..20 {
        sim.advance(Action::new(0.3, 0.0));
    }
    let live = t.session().sim().state().robot;
    let headless = sim.state().robot;
    assert_eq!(live, headless);
    let moved = live.pose.position().distance(&t.env().world.start_pose().position());
    // 2 s at 0.3 m/s less the 0.15 s ramp at 2 m/s^2
    assert!((moved - (0.6 - 0.3 * 0.15 / 2.0)).abs() < 0.01, "moved {moved}");
}

/// Autopilot for 3 s, pause, rewind to 1 s, mark, drive a timeline, mark
/// end, save.
fn type_a_sequence(t: &mut Teleop) -> Vec<(u64, Action)> {
    run(t, 30);
    accepted(&t.handle(1, C::Pause));
    accepted(&t.handle(1, C::RewindTo { t: 1.0 }));
    accepted(&t.handle(1, C::MarkBegin));
    accepted(&t.handle(1, C::TakeControl));
    let timeline = [(0.2, 0.0), (0.4, 0.3), (0.4, -0.3), (0.1, 0.0)];
    let mut driven = Vec::new();
    for (v, w) in timeline {
        accepted(&t.handle(1, C::Drive { v, w }));
        for _ in 0..6 {
            driven.push((t.sim_tick(), Action::new(v, w)));
            t.tick();
        }
    }
    accepted(&t.handle(1, C::MarkEnd { itype: InterventionType::TypeA }));
    accepted(&t.handle(1, C::ReleaseControl));
    let msgs = t.handle(1, C::SaveRecord);
    assert!(matches!(msgs[0].payload, Payload::RecordAck { context_id: 1, steps: 24, .. }), "{msgs:?}");
    driven
}

#[test]
fn type_a_sequence_saves_the_drive_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = Outputs {
        records: Some(dir.path().join("interventions.log")),
        commands: Some(dir.path().join("commands.jsonl")),
    };
    let mut t = teleop().with_outputs(outputs.clone()).unwrap();
    let driven = type_a_sequence(&mut t);

    let saved = load_log(outputs.records.as_ref().unwrap()).unwrap();
    assert_eq!(saved.len(), 1);
    let r = &saved[0];
    assert_eq!((r.context_id, r.itype), (1, InterventionType::TypeA));
    assert_eq!(r.env_file, "open");
    let period = TeleopConfig::default().sim.control_period();
    assert!((r.steps[0].t - 1.0).abs() < 1e-9);
    assert_eq!(r.steps.len(), driven.len());
    for (k, (s, (tick, a))) in r.steps.iter().zip(&driven).enumerate() {
        assert!((s.t - (1.0 + k as f64 * period)).abs() < 1e-9);
        assert!((s.t - *tick as f64 * 0.05).abs() < 1e-9);
        assert_eq!(s.action, *a);
    }
    assert_eq!(parse_log(&write_log(&saved)).unwrap(), saved);

    // the command log on disk replays to the same bytes
    let replayed = replay_file(outputs.commands.as_ref().unwrap()).unwrap();
    assert_eq!(
        write_log(replayed.saved()),
        std::fs::read_to_string(outputs.records.as_ref().unwrap()).unwrap()
    );
}

#[test]
fn command_log_text_round_trips() {
    let mut t = teleop();
    type_a_sequence(&mut t);
    let log = t.command_log();
    let parsed = CommandLog::parse(&log.to_text()).unwrap();
    assert_eq!(&parsed, log);
    let again = replay(&parsed).unwrap();
    assert_eq!(write_log(again.saved()), write_log(t.saved()));
    assert_eq!(again.session().sim().state(), t.session().sim().state());
}

#[test]
fn load_env_resolves_to_grid_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("room.grid");
    std::fs::write(&path, open_grid().to_text()).unwrap();
    let mut t = teleop();
    let (code, _) = error_of(&t.handle(
        1,
        C::LoadEnv {
            env: EnvSource::File {
                path: dir.path().join("missing.grid").display().to_string(),
            },
        },
    ));
    assert_eq!(code, ErrorCode::Env);
    let msgs = t.handle(
        1,
        C::LoadEnv {
            env: EnvSource::File {
                path: path.display().to_string(),
            },
        },
    );
    assert_eq!(msgs[0].kind(), "hello");
    let logged = &t.command_log().entries[0].cmd;
    assert!(matches!(logged, C::LoadEnv { env: EnvSource::Grid { name: Some(n), .. } } if *n == path.display().to_string()));
    std::fs::remove_file(&path).unwrap();
    replay(t.command_log()).unwrap();

    let msgs = t.handle(
        1,
        C::LoadEnv {
            env: EnvSource::Generated {
                seed: 3,
                fill_prob: 0.35,
            },
        },
    );
    accepted(&msgs);
    assert_eq!(t.env().name, "ca_3_0.35");
}

#[test]
fn collision_pauses_the_session() {
    let mut g = open_grid();
    g.fill_rect(1, 10, 22, 10, true);
    let mut t = teleop();
    accepted(&t.handle(
        1,
        C::LoadEnv {
            env: EnvSource::Grid {
                text: g.to_text(),
                name: None,
            },
        },
    ));
    accepted(&t.handle(1, C::TakeControl));
    accepted(&t.handle(1, C::Drive { v: 1.0, w: 0.0 }));
    let msgs = run(&mut t, 100);
    assert_eq!(t.phase(), Phase::Paused);
    assert!(msgs
        .iter()
        .any(|m| matches!(&m.payload, Payload::Status(s) if s.event == "collision")));
}

fn command() -> impl Strategy<Value = (u64, C)> {
    let cmd = prop_oneof![
        Just(C::Start),
        Just(C::Pause),
        (0.0..6.0f64).prop_map(|t| C::RewindTo { t }),
        (-0.5..1.0f64, -2.0..2.0f64).prop_map(|(v, w)| C::Drive { v, w }),
        Just(C::Drive { v: f64::NAN, w: 0.0 }),
        Just(C::TakeControl),
        Just(C::ReleaseControl),
        Just(C::MarkBegin),
        prop_oneof![
            Just(InterventionType::TypeA),
            Just(InterventionType::TypeB),
            Just(InterventionType::Demo)
        ]
        .prop_map(|itype| C::MarkEnd { itype }),
        Just(C::SaveRecord),
        (0u32..3).prop_map(|version| C::Hello { version }),
    ];
    (1u64..3, cmd)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn any_command_sequence_is_safe_and_replayable(
        script in prop::collection::vec((0usize..4, command()), 1..40)
    ) {
        let mut t = teleop();
        let mut seq = 0;
        for (ticks, (client, cmd)) in script {
            for m in run(&mut t, ticks) {
                prop_assert_eq!(m.seq, seq + 1);
                seq = m.seq;
            }
            let before = t.command_log().entries.len();
            let msgs = t.handle(client, cmd);
            prop_assert!(!msgs.is_empty());
            for m in &msgs {
                prop_assert_eq!(m.seq, seq + 1);
                seq = m.seq;
            }
            let rejected = msgs.iter().any(|m| m.kind() == "error");
            prop_assert_eq!(rejected, msgs.len() == 1 && t.command_log().entries.len() == before);
        }
        let mut again = replay(t.command_log()).unwrap();
        while again.ticks() < t.ticks() {
            again.tick();
        }
        prop_assert_eq!(write_log(again.saved()), write_log(t.saved()));
        prop_assert_eq!(again.session().sim().state(), t.session().sim().state());
    }
}
