//! API name tables used by the generator.

/// Everyday framework APIs benign code is built from, grouped by class.
/// None of these classes appear in a motif's exclusive set.
const BENIGN: &[(&str, &[&str])] = &[
    ("Landroid/app/Activity;", &["setContentView", "findViewById", "startActivity", "finish", "getIntent", "runOnUiThread", "getSharedPreferences", "onBackPressed", "startActivityForResult", "getWindow"]),
    ("Landroid/app/AlertDialog$Builder;", &["<init>", "setTitle", "setMessage", "setPositiveButton", "create", "show"]),
    ("Landroid/app/NotificationManager;", &["notify", "cancel", "createNotificationChannel"]),
    ("Landroid/app/PendingIntent;", &["getActivity", "getBroadcast"]),
    ("Landroid/app/AlarmManager;", &["set", "cancel"]),
    ("Landroid/app/Service;", &["startForeground", "stopSelf"]),
    ("Landroid/content/Context;", &["getSystemService", "getPackageName", "getResources", "getFilesDir", "getCacheDir", "startService", "sendBroadcast", "registerReceiver", "getContentResolver", "getApplicationContext"]),
    ("Landroid/content/Intent;", &["<init>", "getAction", "getExtras", "putExtra", "getStringExtra", "setAction", "setFlags", "getData"]),
    ("Landroid/content/IntentFilter;", &["<init>", "addAction"]),
    ("Landroid/content/SharedPreferences;", &["getString", "getBoolean", "getInt", "edit"]),
    ("Landroid/content/SharedPreferences$Editor;", &["putString", "putBoolean", "putInt", "apply", "commit"]),
    ("Landroid/content/ContentResolver;", &["query", "insert", "update", "delete"]),
    ("Landroid/content/ContentValues;", &["<init>", "put"]),
    ("Landroid/content/res/Resources;", &["getString", "getColor", "getDrawable", "getDimensionPixelSize"]),
    ("Landroid/content/pm/PackageManager;", &["getPackageInfo", "getApplicationInfo", "checkPermission"]),
    ("Landroid/database/Cursor;", &["moveToFirst", "moveToNext", "getString", "getInt", "getColumnIndex", "close", "getCount"]),
    ("Landroid/database/sqlite/SQLiteDatabase;", &["execSQL", "query", "insert", "update", "delete", "beginTransaction", "endTransaction", "setTransactionSuccessful"]),
    ("Landroid/database/sqlite/SQLiteOpenHelper;", &["getWritableDatabase", "getReadableDatabase", "close"]),
    ("Landroid/graphics/Bitmap;", &["createBitmap", "getWidth", "getHeight", "compress", "recycle"]),
    ("Landroid/graphics/BitmapFactory;", &["decodeFile", "decodeResource", "decodeStream"]),
    ("Landroid/graphics/Canvas;", &["<init>", "drawBitmap", "drawText", "drawRect"]),
    ("Landroid/graphics/Paint;", &["<init>", "setColor", "setTextSize", "setAntiAlias"]),
    ("Landroid/location/LocationManager;", &["getLastKnownLocation", "requestLocationUpdates", "removeUpdates", "isProviderEnabled"]),
    ("Landroid/location/Location;", &["getLatitude", "getLongitude", "getAccuracy"]),
    ("Landroid/media/MediaPlayer;", &["<init>", "setDataSource", "prepare", "start", "stop", "release"]),
    ("Landroid/media/AudioManager;", &["getStreamVolume", "setStreamVolume", "setRingerMode"]),
    ("Landroid/net/ConnectivityManager;", &["getActiveNetworkInfo", "getNetworkCapabilities"]),
    ("Landroid/net/NetworkInfo;", &["isConnected", "getType"]),
    ("Landroid/net/Uri;", &["parse", "getPath", "getQueryParameter", "fromFile"]),
    ("Landroid/net/wifi/WifiManager;", &["getConnectionInfo", "isWifiEnabled"]),
    ("Landroid/os/Bundle;", &["<init>", "get", "getString", "putString", "getInt", "putInt", "containsKey"]),
    ("Landroid/os/Handler;", &["<init>", "post", "postDelayed", "sendMessage", "removeCallbacks"]),
    ("Landroid/os/Looper;", &["getMainLooper", "myLooper"]),
    ("Landroid/os/Message;", &["obtain"]),
    ("Landroid/os/PowerManager;", &["newWakeLock"]),
    ("Landroid/os/PowerManager$WakeLock;", &["acquire", "release"]),
    ("Landroid/os/Environment;", &["getExternalStorageDirectory", "getExternalStorageState"]),
    ("Landroid/os/SystemClock;", &["elapsedRealtime", "sleep"]),
    ("Landroid/provider/MediaStore$Images$Media;", &["insertImage", "getBitmap"]),
    ("Landroid/text/TextUtils;", &["isEmpty", "join", "equals"]),
    ("Landroid/util/Log;", &["d", "e", "i", "w"]),
    ("Landroid/util/Base64;", &["encodeToString", "decode"]),
    ("Landroid/view/View;", &["setVisibility", "setOnClickListener", "findViewById", "invalidate", "setEnabled", "getContext"]),
    ("Landroid/view/LayoutInflater;", &["from", "inflate"]),
    ("Landroid/view/Window;", &["setFlags", "addFlags"]),
    ("Landroid/view/inputmethod/InputMethodManager;", &["hideSoftInputFromWindow"]),
    ("Landroid/widget/TextView;", &["setText", "getText", "setTextColor"]),
    ("Landroid/widget/EditText;", &["getText", "setHint"]),
    ("Landroid/widget/Button;", &["setOnClickListener", "setText"]),
    ("Landroid/widget/ImageView;", &["setImageBitmap", "setImageResource"]),
    ("Landroid/widget/Toast;", &["makeText", "show"]),
    ("Landroid/widget/ListView;", &["setAdapter", "setOnItemClickListener"]),
    ("Landroid/widget/ArrayAdapter;", &["<init>", "notifyDataSetChanged"]),
    ("Landroid/widget/ProgressBar;", &["setProgress", "setMax"]),
    ("Landroid/webkit/WebView;", &["loadUrl", "getSettings", "setWebViewClient", "addJavascriptInterface"]),
    ("Landroid/webkit/WebSettings;", &["setJavaScriptEnabled", "setDomStorageEnabled"]),
    ("Ljava/io/File;", &["<init>", "exists", "mkdirs", "delete", "getAbsolutePath", "listFiles", "length"]),
    ("Ljava/io/FileInputStream;", &["<init>", "read", "close"]),
    ("Ljava/io/FileOutputStream;", &["<init>", "write", "close"]),
    ("Ljava/io/BufferedReader;", &["<init>", "readLine", "close"]),
    ("Ljava/io/InputStreamReader;", &["<init>"]),
    ("Ljava/io/InputStream;", &["read", "close"]),
    ("Ljava/io/OutputStream;", &["write", "flush", "close"]),
    ("Ljava/io/ByteArrayOutputStream;", &["<init>", "toByteArray", "toString"]),
    ("Ljava/lang/StringBuilder;", &["<init>", "append", "toString"]),
    ("Ljava/lang/String;", &["equals", "valueOf", "format", "getBytes", "substring", "split", "trim", "contains", "length"]),
    ("Ljava/lang/Integer;", &["parseInt", "valueOf", "toString"]),
    ("Ljava/lang/Long;", &["parseLong", "valueOf"]),
    ("Ljava/lang/Object;", &["toString", "getClass", "hashCode"]),
    ("Ljava/lang/System;", &["currentTimeMillis", "arraycopy", "getProperty"]),
    ("Ljava/lang/Thread;", &["<init>", "start", "sleep", "interrupt"]),
    ("Ljava/lang/Runtime;", &["getRuntime", "availableProcessors"]),
    ("Ljava/lang/Math;", &["max", "min", "abs", "random"]),
    ("Ljava/lang/Exception;", &["printStackTrace", "getMessage"]),
    ("Ljava/util/ArrayList;", &["<init>", "add", "get", "size", "clear", "remove"]),
    ("Ljava/util/List;", &["add", "get", "size", "isEmpty", "iterator"]),
    ("Ljava/util/HashMap;", &["<init>", "put", "get", "containsKey", "remove"]),
    ("Ljava/util/Map;", &["put", "get", "entrySet", "keySet"]),
    ("Ljava/util/Iterator;", &["hasNext", "next"]),
    ("Ljava/util/Collections;", &["sort", "unmodifiableList"]),
    ("Ljava/util/Arrays;", &["asList", "sort", "copyOf"]),
    ("Ljava/util/Date;", &["<init>", "getTime"]),
    ("Ljava/util/Calendar;", &["getInstance", "get", "set"]),
    ("Ljava/util/Locale;", &["getDefault"]),
    ("Ljava/util/Random;", &["<init>", "nextInt"]),
    ("Ljava/util/UUID;", &["randomUUID", "toString"]),
    ("Ljava/util/Timer;", &["<init>", "schedule", "cancel"]),
    ("Ljava/util/concurrent/Executors;", &["newSingleThreadExecutor", "newFixedThreadPool"]),
    ("Ljava/util/concurrent/ExecutorService;", &["submit", "shutdown", "execute"]),
    ("Ljava/util/regex/Pattern;", &["compile", "matcher"]),
    ("Ljava/util/regex/Matcher;", &["find", "group", "matches"]),
    ("Ljava/util/zip/GZIPInputStream;", &["<init>"]),
    ("Ljava/security/MessageDigest;", &["getInstance", "digest", "update"]),
    ("Ljavax/crypto/Cipher;", &["getInstance", "init", "doFinal"]),
    ("Ljavax/crypto/spec/SecretKeySpec;", &["<init>"]),
    ("Lorg/json/JSONObject;", &["<init>", "put", "getString", "optString", "toString", "getJSONArray", "has"]),
    ("Lorg/json/JSONArray;", &["<init>", "length", "getJSONObject", "put"]),
];

/// Sensitive APIs listed in the superset that no generated app calls.
const UNUSED_SENSITIVE: &[&str] = &[
    "Landroid/accounts/AccountManager;->getAccounts",
    "Landroid/bluetooth/BluetoothAdapter;->getDefaultAdapter",
    "Landroid/bluetooth/BluetoothAdapter;->enable",
    "Landroid/hardware/Camera;->open",
    "Landroid/hardware/Camera;->takePicture",
    "Landroid/media/MediaRecorder;->setAudioSource",
    "Landroid/media/MediaRecorder;->start",
    "Landroid/app/admin/DevicePolicyManager;->lockNow",
    "Landroid/app/ActivityManager;->getRunningTasks",
    "Landroid/app/ActivityManager;->killBackgroundProcesses",
    "Landroid/content/pm/PackageManager;->setComponentEnabledSetting",
    "Landroid/content/pm/PackageManager;->getInstalledPackages",
    "Landroid/nfc/NfcAdapter;->getDefaultAdapter",
    "Landroid/os/Vibrator;->vibrate",
    "Landroid/provider/ContactsContract$Contacts;->getLookupUri",
    "Landroid/provider/CallLog$Calls;->getLastOutgoingCall",
    "Ljava/lang/Runtime;->exec",
    "Ljava/lang/ProcessBuilder;->start",
];

/// Calls that are not in the sensitive superset at all; sprinkled into
/// listings to exercise vocabulary filtering.
pub const NOISE: &[&str] = &[
    "Lkotlin/jvm/internal/Intrinsics;->checkNotNullParameter",
    "Lkotlin/jvm/internal/Intrinsics;->areEqual",
    "Landroidx/appcompat/app/AppCompatActivity;->onCreate",
    "Landroidx/core/content/ContextCompat;->checkSelfPermission",
    "Landroidx/recyclerview/widget/RecyclerView;->setAdapter",
    "Lcom/google/gson/Gson;->toJson",
    "Lcom/google/gson/Gson;->fromJson",
    "Lokhttp3/OkHttpClient;->newCall",
];

/// Package segments that never start an app-local package, so local class
/// names cannot collide with API classes.
pub const RESERVED_ROOTS: &[&str] = &["android", "androidx", "dalvik", "java", "javax", "kotlin", "org", "okhttp3"];

pub fn benign_pool() -> Vec<String> {
    BENIGN
        .iter()
        .flat_map(|(class, methods)| methods.iter().map(move |m| format!("{class}->{m}")))
        .collect()
}

/// Relative draw weight of pool entry `i`, in `[1, 4]`. Fixed so that API
/// popularity does not depend on the seed.
pub fn pool_weight(i: usize) -> f64 {
    1.0 + ((i * 37) % 13) as f64 / 4.0
}

pub fn unused_sensitive() -> impl Iterator<Item = &'static str> {
    UNUSED_SENSITIVE.iter().copied()
}

pub const VENDORS: &[&str] = &["sunnyapps", "bluefox", "pixelcraft", "greenleaf", "nimbus", "quickmobi", "tinytools", "brightway", "coralsoft", "redkite"];
pub const PRODUCTS: &[&str] = &["notes", "weather", "flashlight", "wallpaper", "scanner", "player", "battery", "keyboard", "fitness", "reader", "gallery", "launcher"];
pub const CLASS_NAMES: &[&str] = &["MainActivity", "SettingsActivity", "DataManager", "NetworkHelper", "DbHelper", "Utils", "ImageLoader", "PrefsStore", "SyncService", "BootReceiver", "ListAdapter", "Config", "Tracker", "CacheManager", "AboutFragment"];
pub const METHOD_NAMES: &[&str] = &["onCreate", "onResume", "onPause", "onClick", "init", "load", "save", "refresh", "update", "parse", "render", "handle", "fetch", "build", "check", "notifyUser", "run", "open", "close", "reset"];
pub const PLANTED_CLASS_NAMES: &[&str] = &["SmsReceiver", "UpdateService", "CoreTask", "PushHandler", "Loader", "Stub"];
pub const PLANTED_METHOD_NAMES: &[&str] = &["onReceive", "doInBackground", "sendData", "process", "collect", "a", "b", "c", "exec", "report"];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn pool_is_large_unique_and_avoids_noise() {
        let pool = benign_pool();
        let set: BTreeSet<&String> = pool.iter().collect();
        assert_eq!(set.len(), pool.len());
        assert!(pool.len() >= 280, "{}", pool.len());
        for n in NOISE.iter().chain(UNUSED_SENSITIVE) {
            assert!(!set.contains(&n.to_string()));
        }
        assert!((0..pool.len()).all(|i| (1.0..=4.0).contains(&pool_weight(i))));
    }
}
