use navtune::intervention::InterventionType;
use navtune::sim::StepStatus;
use navtune_teleop::protocol::{
    ClientCommand as C, EnvSource, ErrorCode, Payload, Phase, SessionMessage, StateFrame,
};

#[test]
fn client_commands_parse_from_json() {
    let cases = [
        (r#"{"kind":"hello","version":1}"#, C::Hello { version: 1 }),
        (r#"{"kind":"start"}"#, C::Start),
        (r#"{"kind":"pause"}"#, C::Pause),
        (r#"{"kind":"rewind_to","t":2.5}"#, C::RewindTo { t: 2.5 }),
        (r#"{"kind":"drive","v":0.3,"w":-0.1}"#, C::Drive { v: 0.3, w: -0.1 }),
        (r#"{"kind":"take_control"}"#, C::TakeControl),
        (r#"{"kind":"release_control"}"#, C::ReleaseControl),
        (r#"{"kind":"mark_begin"}"#, C::MarkBegin),
        (r#"{"kind":"mark_end","itype":"B"}"#, C::MarkEnd { itype: InterventionType::TypeB }),
        (r#"{"kind":"mark_end","itype":"Demo"}"#, C::MarkEnd { itype: InterventionType::Demo }),
        (r#"{"kind":"save_record"}"#, C::SaveRecord),
        (
            r#"{"kind":"load_env","env":{"type":"generated","seed":4,"fill_prob":0.4}}"#,
            C::LoadEnv { env: EnvSource::Generated { seed: 4, fill_prob: 0.4 } },
        ),
        (
            r#"{"kind":"load_env","env":{"type":"file","path":"a.grid"}}"#,
            C::LoadEnv { env: EnvSource::File { path: "a.grid".into() } },
        ),
    ];
    for (text, want) in cases {
        let got: C = serde_json::from_str(text).unwrap();
        assert_eq!(got, want, "{text}");
        let back: C = serde_json::from_str(&serde_json::to_string(&got).unwrap()).unwrap();
        assert_eq!(back, want);
        assert_eq!(serde_json::to_value(&got).unwrap()["kind"], got.name());
    }
}

#[test]
fn bad_commands_are_rejected_by_the_parser() {
    for text in [
        r#"{"kind":"fly"}"#,
        r#"{"kind":"drive","v":0.3}"#,
        r#"{"kind":"drive","v":0.3,"w":0.0,"extra":1}"#,
        r#"{"kind":"mark_end","itype":"C"}"#,
        r#"{"v":0.3,"w":0.0}"#,
        "[]",
    ] {
        assert!(serde_json::from_str::<C>(text).is_err(), "{text}");
    }
}

#[test]
fn session_messages_carry_kind_and_seq_at_top_level() {
    let msgs = [
        SessionMessage {
            seq: 7,
            payload: Payload::State(StateFrame {
                t: 1.5,
                tick: 30,
                pose: [1.0, 2.0, 0.5],
                vel: [0.3, 0.0],
                goal: [1.0, 4.0],
                goal_dist: 2.0,
                phase: Phase::Running,
                controller: Some(2),
                mark_begin: None,
                outcome: StepStatus::Running,
            }),
        },
        SessionMessage {
            seq: 8,
            payload: Payload::Error {
                client: Some(2),
                code: ErrorCode::ProtocolViolation,
                message: "mark_end is not allowed in the current state".into(),
                expected: vec!["mark_open".into()],
            },
        },
        SessionMessage {
            seq: 9,
            payload: Payload::RecordAck {
                client: 2,
                context_id: 3,
                itype: InterventionType::TypeA,
                steps: 40,
                t_start: 1.0,
                t_end: 4.9,
                path: None,
            },
        },
    ];
    for m in msgs {
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["seq"], m.seq);
        assert_eq!(v["kind"], m.kind());
        let back: SessionMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
