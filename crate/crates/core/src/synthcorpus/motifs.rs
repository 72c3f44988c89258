//! Malicious behaviour templates planted into generated apps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Control-flow shape wrapped around a run of calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    /// Straight-line.
    Chain,
    /// Skipped when a condition fails.
    Guard,
    /// Loop head test, body, back-edge.
    Loop,
    /// Two alternatives; the calls are split between the arms.
    Branch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub apis: &'static [&'static str],
    pub flow: Flow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Motif {
    pub name: &'static str,
    pub stages: &'static [Stage],
    /// Ordinary APIs placed next to the call that enters the motif.
    pub trigger: &'static [&'static str],
}

const fn stage(apis: &'static [&'static str], flow: Flow) -> Stage {
    Stage { apis, flow }
}

const SMS: Motif = Motif {
    name: "sms-exfiltration",
    stages: &[
        stage(&["Landroid/os/Bundle;->get", "Ljava/lang/StringBuilder;-><init>"], Flow::Guard),
        stage(
            &[
                "Landroid/telephony/SmsMessage;->createFromPdu",
                "Landroid/telephony/SmsMessage;->getDisplayOriginatingAddress",
                "Landroid/telephony/SmsMessage;->getDisplayMessageBody",
                "Ljava/lang/StringBuilder;->append",
            ],
            Flow::Loop,
        ),
        stage(&["Landroid/telephony/SmsManager;->getDefault", "Landroid/telephony/SmsManager;->divideMessage"], Flow::Chain),
        stage(&["Landroid/telephony/SmsManager;->sendTextMessage"], Flow::Loop),
    ],
    trigger: &["Landroid/content/Intent;->getAction", "Landroid/content/Intent;->getExtras"],
};

const HTTP: Motif = Motif {
    name: "http-upload",
    stages: &[
        stage(&["Lorg/json/JSONObject;-><init>", "Lorg/json/JSONObject;->put"], Flow::Chain),
        stage(&["Ljava/net/URL;-><init>"], Flow::Chain),
        stage(
            &[
                "Ljava/net/URL;->openConnection",
                "Ljava/net/HttpURLConnection;->setRequestMethod",
                "Ljava/net/HttpURLConnection;->setRequestProperty",
                "Ljava/net/HttpURLConnection;->setDoOutput",
                "Ljava/net/HttpURLConnection;->getOutputStream",
                "Ljava/io/OutputStream;->write",
                "Ljava/net/HttpURLConnection;->getResponseCode",
            ],
            Flow::Loop,
        ),
        stage(&["Ljava/net/HttpURLConnection;->disconnect"], Flow::Chain),
    ],
    trigger: &["Landroid/net/ConnectivityManager;->getActiveNetworkInfo", "Landroid/net/NetworkInfo;->isConnected"],
};

const DROPPER: Motif = Motif {
    name: "dynamic-loading",
    stages: &[
        stage(
            &["Landroid/content/Context;->getFilesDir", "Ljava/io/File;-><init>", "Ljava/io/FileOutputStream;-><init>", "Ljava/io/FileOutputStream;->write"],
            Flow::Chain,
        ),
        stage(&["Ldalvik/system/DexClassLoader;-><init>"], Flow::Guard),
        stage(
            &[
                "Ljava/lang/ClassLoader;->loadClass",
                "Ljava/lang/Class;->getMethod",
                "Ljava/lang/Class;->newInstance",
                "Ljava/lang/reflect/Method;->invoke",
            ],
            Flow::Loop,
        ),
        stage(&["Ljava/io/File;->delete"], Flow::Chain),
    ],
    trigger: &["Landroid/content/Context;->getCacheDir", "Ljava/io/File;->exists"],
};

const DEVICE_ID: Motif = Motif {
    name: "device-id-harvest",
    stages: &[
        stage(&["Landroid/content/Context;->getSystemService"], Flow::Chain),
        stage(
            &[
                "Landroid/telephony/TelephonyManager;->getDeviceId",
                "Landroid/telephony/TelephonyManager;->getSubscriberId",
                "Landroid/telephony/TelephonyManager;->getSimSerialNumber",
                "Landroid/telephony/TelephonyManager;->getLine1Number",
                "Landroid/telephony/TelephonyManager;->getNetworkOperatorName",
            ],
            Flow::Loop,
        ),
        stage(&["Landroid/provider/Settings$Secure;->getString"], Flow::Guard),
        stage(
            &["Landroid/content/SharedPreferences$Editor;->putString", "Landroid/content/SharedPreferences$Editor;->apply"],
            Flow::Chain,
        ),
    ],
    trigger: &["Landroid/content/Context;->getApplicationContext", "Landroid/app/Activity;->getSharedPreferences"],
};

const LIBRARY: &[Motif] = &[SMS, HTTP, DROPPER, DEVICE_ID];

pub fn library() -> &'static [Motif] {
    LIBRARY
}

pub fn motif(name: &str) -> Result<&'static Motif> {
    LIBRARY.iter().find(|m| m.name == name).ok_or_else(|| {
        let known: Vec<&str> = LIBRARY.iter().map(|m| m.name).collect();
        Error::usage(format!("unknown motif {name:?}; known: {}", known.join(", ")))
    })
}

impl Motif {
    /// Distinct APIs in stage order.
    pub fn apis(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for a in self.stages.iter().flat_map(|s| s.apis.iter().copied()) {
            if !out.contains(&a) {
                out.push(a);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::synthcorpus::pool::benign_pool;

    #[test]
    fn every_motif_has_exclusive_apis_and_shares_some() {
        let pool: BTreeSet<String> = benign_pool().into_iter().collect();
        for m in library() {
            let apis = m.apis();
            let exclusive = apis.iter().filter(|a| !pool.contains(**a)).count();
            assert!(exclusive >= 4, "{}", m.name);
            assert!(exclusive < apis.len(), "{} shares nothing", m.name);
            assert!(m.trigger.iter().all(|t| pool.contains(*t)));
        }
        assert!(motif("nope").unwrap_err().is_usage());
    }
}
