//! Drives the console session service in-process with the same JSON lines
//! a browser would send over TCP (`xil serve`).

use xil::harness::SessionService;

fn main() {
    let svc = SessionService::new();
    let send = |line: &str| {
        println!("> {line}");
        let reply = svc.handle(line);
        println!("< {}\n", if reply.len() > 400 { format!("{}...", &reply[..400]) } else { reply.clone() });
        serde_json::from_str::<serde_json::Value>(&reply).expect("reply is JSON")
    };
    send(r#"{"op":"create","domain":"single_4way","strategy":"vis_genr_expl","seed":1,"quality":"lq"}"#);
    let started = send(r#"{"op":"start","session":"s1"}"#);
    let truth = started["scene"]["truck"]["whole"].as_str().unwrap_or_default().to_string();
    let answer = send(r#"{"op":"say","session":"s1","text":"What kind of truck is this_o?"}"#);
    println!("learner said: {}  (truth: {truth})\n", answer["learner"]["surface"]);
    send(r#"{"op":"say","session":"s1","text":"What sort of truck is this_o?"}"#);
    send(r#"{"op":"memory","session":"s1"}"#);
}
