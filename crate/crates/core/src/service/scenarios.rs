//! Scripted dialogs replayed by `openpda demo`.

use serde_json::{json, Value};

pub enum Expect {
    Question(&'static str),
    /// The command the app must receive, and the light relay state the
    /// device must reach afterwards when that matters.
    Dispatch { command: Value, light: Option<bool> },
}

pub struct Turn {
    pub text: &'static str,
    pub expect: Expect,
}

pub struct Scenario {
    pub id: &'static str,
    pub turns: Vec<Turn>,
}

fn ask(text: &'static str, question: &'static str) -> Turn {
    Turn { text, expect: Expect::Question(question) }
}

fn send(text: &'static str, command: Value, light: Option<bool>) -> Turn {
    Turn { text, expect: Expect::Dispatch { command, light } }
}

pub fn all() -> Vec<Scenario> {
    vec![
        Scenario {
            id: "computer-off-two-turns",
            turns: vec![
                ask("Home, turn off", "What should I turn off?"),
                send("the computer", json!({"AppName": "Home", "Intent": "Turn off", "object": "the computer"}), None),
            ],
        },
        Scenario {
            id: "remind-one-shot",
            turns: vec![send(
                "Calendar, remind 16th of November to meet Sasha",
                json!({"AppName": "Calendar", "Intent": "Create remind", "Subject": "meet Sasha", "Date": "16th of November"}),
                None,
            )],
        },
        Scenario {
            id: "remind-three-turns",
            turns: vec![
                ask("Calendar, remind", "When should I remind you?"),
                ask("on Monday", "What should I remind you?"),
                send(
                    "meet Sasha on the airport",
                    json!({"AppName": "Calendar", "Intent": "Create remind", "Subject": "meet Sasha on the airport", "Date": "Monday"}),
                    None,
                ),
            ],
        },
        Scenario {
            id: "ac-off",
            turns: vec![send(
                "Home, turn off air conditioning",
                json!({"AppName": "Home", "Intent": "Turn off", "object": "air conditioning"}),
                None,
            )],
        },
        Scenario {
            id: "lights-on",
            turns: vec![send(
                "Home, turn on the lights",
                json!({"AppName": "Home", "Intent": "Turn on", "object": "the lights"}),
                None,
            )],
        },
        Scenario {
            id: "lights-toggle",
            turns: vec![
                send(
                    "Home, turn on the lights",
                    json!({"AppName": "Home", "Intent": "Turn on", "object": "the lights"}),
                    Some(true),
                ),
                send(
                    "Home, turn off the light",
                    json!({"AppName": "Home", "Intent": "Turn off", "object": "the light"}),
                    Some(false),
                ),
            ],
        },
    ]
}
