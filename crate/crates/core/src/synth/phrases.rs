//! Phrase banks shared by every topic. `{symptom}` and `{e}` are slots.

use super::AttributeKind;

pub const SURNAMES: &[&str] = &[
    "Tan", "Lee", "Smith", "Wong", "Kumar", "Lim", "Brown", "Garcia", "Chen", "Nguyen", "Ong",
    "Walker", "Rahman", "Davis", "Goh", "Murphy",
];

pub const DISCHARGE_DAYS: &[&str] = &[
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
];

pub const NURSE_GREETINGS: &[&str] = &[
    "Hi Mr {name}, you were discharged on {day}. I'd like to check a few things with you.",
    "Hello Madam {name}, I am calling from the hospital to follow up on your discharge.",
    "Good morning, am I speaking to {name}? This is the nurse from the ward.",
    "Hi {name}, this is the routine follow up call since you went home on {day}.",
];

pub const PATIENT_GREETINGS: &[&str] = &[
    "Ok, ok ... I think I feel better.",
    "Yes, I am here. Thank you for calling, nurse.",
    "Oh hello nurse. Ya, you can ask.",
    "Yes, speaking. I'm feeling so-so lah.",
];

pub const NURSE_CLOSINGS: &[&str] = &[
    "Alright, thank you for your time. Please take care.",
    "Okay, I have noted everything down. Rest well.",
    "Thank you, that is all for today. We will call again next week.",
    "Good, that is all for now. Call us if you feel unwell.",
];

pub const PATIENT_CLOSINGS: &[&str] = &[
    "Okay, thank you nurse. Bye bye.",
    "Thank you for calling.",
    "Alright, noted. Bye.",
];

/// First patient reply in a topic block.
pub const PATIENT_OPENERS: &[&str] = &[
    "Yes, it is still there.",
    "Ya, still have, nurse.",
    "Hmm, yes, I still have it sometimes.",
    "Yes, I think so.",
];

/// First patient reply when no attribute is going to be mentioned.
pub const PATIENT_VAGUE: &[&str] = &[
    "Yes, still have, but I cannot really describe it, nurse. It just comes and goes.",
    "Ya, it is there, but nothing special to tell you about it lah.",
    "Hmm, I am not very sure. I didn't really pay attention to it these days.",
];

pub const PATIENT_NOTHING_MORE: &[&str] = &[
    "No, nothing else I can think of right now.",
    "Not really, I think that is about it.",
    "Hmm, no, I cannot remember anything more about it.",
];

pub const NURSE_ACKS: &[&str] = &["I see.", "Okay, noted.", "Alright.", "Hmm, okay.", "Oh, I see."];

pub const NURSE_ANYTHING_ELSE: &[&str] = &[
    "Is there anything else about the {symptom} that you want to tell me?",
    "Anything else you noticed about the {symptom}?",
];

pub const NURSE_TOPIC_WRAPUPS: &[&str] = &[
    "Okay, I will write this down for the doctor to review.",
    "Alright, let me take note of that first.",
    "Okay, thank you for telling me about the {symptom}.",
];

/// Extra patient sentences; carry no annotated entity.
pub const ELABORATIONS: &[&str] = &[
    "I took the medicine you gave me but I am not sure whether it helps.",
    "My daughter told me to tell you about it when you call.",
    "I didn't want to trouble the doctor for such a small thing.",
    "Last week it was worse, now maybe a little better.",
    "I also try to rest more, like what the doctor said.",
    "Sometimes I am not sure if it is the same as before.",
    "My wife keeps asking me to go back to the clinic.",
];

pub const FILLERS: &[&str] = &["Um,", "Uh,", "Well,", "Hmm,", "Er,", "You know,"];

pub fn nurse_questions(attr: AttributeKind) -> &'static [&'static str] {
    match attr {
        AttributeKind::Time => &[
            "When did the {symptom} start? Can you remember roughly?",
            "How long have you been having the {symptom} already?",
            "Since when did you notice the {symptom}?",
        ],
        AttributeKind::Activities => &[
            "Is there anything that makes the {symptom} come or get worse?",
            "What were you doing when the {symptom} happens?",
            "Does any activity bring on the {symptom}?",
        ],
        AttributeKind::Extent => &[
            "How serious is the {symptom}, would you say?",
            "Can you describe how bad the {symptom} is?",
            "Is the {symptom} very bad or just mild?",
        ],
        AttributeKind::Frequency => &[
            "How often do you get the {symptom}?",
            "Does the {symptom} come every day or only sometimes?",
            "How many times does the {symptom} happen?",
        ],
        AttributeKind::Location => &[
            "Where exactly do you feel the {symptom}?",
            "Which part is it, can you point out where the {symptom} is?",
            "Where is the {symptom} located?",
        ],
    }
}

pub fn patient_answers(attr: AttributeKind) -> &'static [&'static str] {
    match attr {
        AttributeKind::Time => &[
            "It started {e}, I think.",
            "Hmm, I have had it {e}, more or less.",
            "I noticed it {e}, if I remember correctly.",
        ],
        AttributeKind::Activities => &[
            "It gets worse {e}.",
            "Usually it comes {e}, not so much otherwise.",
            "I feel it mostly {e}.",
        ],
        AttributeKind::Extent => &[
            "It is {e}, I would say.",
            "I think it is {e} now.",
            "Hmm, {e} lah, not sure how to describe.",
        ],
        AttributeKind::Frequency => &[
            "It happens {e}.",
            "I get it {e}, I guess.",
            "Maybe {e}, not always the same.",
        ],
        AttributeKind::Location => &[
            "It is {e}.",
            "Mostly {e}, sometimes it spreads out.",
            "I can feel it {e}.",
        ],
    }
}
