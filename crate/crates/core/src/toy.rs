//! A small Java-flavoured API (file I/O, collections, networking) and a
//! corpus of programs written against it.

use crate::aml::{parse_program, ApiDatabase, Program};
use crate::labels::{extract_label, Label};
use crate::pipeline::{CorpusRecord, RunConfig};
use crate::sketch::{abstract_program, Sketch};

pub const API_YAML: &str = r#"types: [String, boolean, int, Exception, IOException, FileNotFoundException,
  MalformedURLException, UnknownHostException, File, FileReader, BufferedReader, FileWriter,
  BufferedWriter, InputStream, FileInputStream, InputStreamReader, OutputStream, FileOutputStream,
  Scanner, ArrayList, Iterator, HashMap, StringBuilder, Random, URL, URLConnection, Socket]
subtypes:
  - {sub: IOException, sup: Exception}
  - {sub: FileNotFoundException, sup: IOException}
  - {sub: MalformedURLException, sup: IOException}
  - {sub: UnknownHostException, sup: IOException}
  - {sub: FileInputStream, sup: InputStream}
  - {sub: FileOutputStream, sup: OutputStream}
methods:
  - {receiver: String, name: length, params: [], returns: int}
  - {receiver: String, name: isEmpty, params: [], returns: boolean}
  - {receiver: String, name: trim, params: [], returns: String}
  - {receiver: String, name: toUpperCase, params: [], returns: String}
  - {receiver: String, name: equals, params: [String], returns: boolean}
  - {receiver: String, name: contains, params: [String], returns: boolean}
  - {receiver: Exception, name: printStackTrace, params: [], returns: void}
  - {receiver: Exception, name: getMessage, params: [], returns: String}
  - {receiver: File, name: new, params: [String], returns: File}
  - {receiver: File, name: exists, params: [], returns: boolean}
  - {receiver: File, name: delete, params: [], returns: boolean}
  - {receiver: File, name: getName, params: [], returns: String}
  - {receiver: File, name: length, params: [], returns: int}
  - {receiver: File, name: mkdir, params: [], returns: boolean}
  - {receiver: FileReader, name: new, params: [String], returns: FileReader}
  - {receiver: FileReader, name: new, params: [File], returns: FileReader}
  - {receiver: FileReader, name: close, params: [], returns: void}
  - {receiver: BufferedReader, name: new, params: [FileReader], returns: BufferedReader}
  - {receiver: BufferedReader, name: new, params: [InputStreamReader], returns: BufferedReader}
  - {receiver: BufferedReader, name: readLine, params: [], returns: String}
  - {receiver: BufferedReader, name: ready, params: [], returns: boolean}
  - {receiver: BufferedReader, name: close, params: [], returns: void}
  - {receiver: FileWriter, name: new, params: [String], returns: FileWriter}
  - {receiver: FileWriter, name: new, params: [File], returns: FileWriter}
  - {receiver: FileWriter, name: close, params: [], returns: void}
  - {receiver: BufferedWriter, name: new, params: [FileWriter], returns: BufferedWriter}
  - {receiver: BufferedWriter, name: write, params: [String], returns: void}
  - {receiver: BufferedWriter, name: newLine, params: [], returns: void}
  - {receiver: BufferedWriter, name: flush, params: [], returns: void}
  - {receiver: BufferedWriter, name: close, params: [], returns: void}
  - {receiver: InputStream, name: read, params: [], returns: int}
  - {receiver: InputStream, name: available, params: [], returns: int}
  - {receiver: InputStream, name: close, params: [], returns: void}
  - {receiver: FileInputStream, name: new, params: [File], returns: FileInputStream}
  - {receiver: InputStreamReader, name: new, params: [InputStream], returns: InputStreamReader}
  - {receiver: InputStreamReader, name: close, params: [], returns: void}
  - {receiver: OutputStream, name: write, params: [int], returns: void}
  - {receiver: OutputStream, name: flush, params: [], returns: void}
  - {receiver: OutputStream, name: close, params: [], returns: void}
  - {receiver: FileOutputStream, name: new, params: [File], returns: FileOutputStream}
  - {receiver: Scanner, name: new, params: [File], returns: Scanner}
  - {receiver: Scanner, name: hasNextLine, params: [], returns: boolean}
  - {receiver: Scanner, name: nextLine, params: [], returns: String}
  - {receiver: Scanner, name: nextInt, params: [], returns: int}
  - {receiver: Scanner, name: close, params: [], returns: void}
  - {receiver: ArrayList, name: new, params: [], returns: ArrayList}
  - {receiver: ArrayList, name: add, params: [String], returns: boolean}
  - {receiver: ArrayList, name: size, params: [], returns: int}
  - {receiver: ArrayList, name: get, params: [int], returns: String}
  - {receiver: ArrayList, name: iterator, params: [], returns: Iterator}
  - {receiver: ArrayList, name: clear, params: [], returns: void}
  - {receiver: ArrayList, name: isEmpty, params: [], returns: boolean}
  - {receiver: Iterator, name: hasNext, params: [], returns: boolean}
  - {receiver: Iterator, name: next, params: [], returns: String}
  - {receiver: HashMap, name: new, params: [], returns: HashMap}
  - {receiver: HashMap, name: put, params: [String, String], returns: String}
  - {receiver: HashMap, name: get, params: [String], returns: String}
  - {receiver: HashMap, name: containsKey, params: [String], returns: boolean}
  - {receiver: HashMap, name: remove, params: [String], returns: String}
  - {receiver: StringBuilder, name: new, params: [], returns: StringBuilder}
  - {receiver: StringBuilder, name: append, params: [String], returns: StringBuilder}
  - {receiver: StringBuilder, name: toString, params: [], returns: String}
  - {receiver: StringBuilder, name: length, params: [], returns: int}
  - {receiver: StringBuilder, name: reverse, params: [], returns: StringBuilder}
  - {receiver: Random, name: new, params: [], returns: Random}
  - {receiver: Random, name: nextInt, params: [int], returns: int}
  - {receiver: Random, name: nextBoolean, params: [], returns: boolean}
  - {receiver: URL, name: new, params: [String], returns: URL}
  - {receiver: URL, name: openConnection, params: [], returns: URLConnection}
  - {receiver: URL, name: openStream, params: [], returns: InputStream}
  - {receiver: URL, name: getHost, params: [], returns: String}
  - {receiver: URLConnection, name: connect, params: [], returns: void}
  - {receiver: URLConnection, name: getInputStream, params: [], returns: InputStream}
  - {receiver: URLConnection, name: getContentLength, params: [], returns: int}
  - {receiver: URLConnection, name: setDoOutput, params: [boolean], returns: void}
  - {receiver: URLConnection, name: getOutputStream, params: [], returns: OutputStream}
  - {receiver: Socket, name: new, params: [String, int], returns: Socket}
  - {receiver: Socket, name: getInputStream, params: [], returns: InputStream}
  - {receiver: Socket, name: getOutputStream, params: [], returns: OutputStream}
  - {receiver: Socket, name: close, params: [], returns: void}
  - {receiver: Socket, name: isConnected, params: [], returns: boolean}
"#;

/// Programs in a uniform style: a call's result is let-bound only when it
/// is used later, bound variables are preferred over `$T` inputs, and
/// conditions are let-chains ending in their last binder.
pub const PROGRAMS: [&str; 50] = [
    // files
    "try { let fr = FileReader.new($String); let br = BufferedReader.new(fr);
       while (let s = br.readLine(): s) do { skip }; call br.close() }
     catch (e: FileNotFoundException) { call e.printStackTrace() }
     catch (e: IOException) { call e.printStackTrace() }",
    "let f = File.new($String); if (let b = f.exists(): b) then { call f.delete() }",
    "let f = File.new($String); let fw = FileWriter.new(f); let bw = BufferedWriter.new(fw);
     call bw.write($String); call bw.newLine(); call bw.close()",
    "try { let fw = FileWriter.new($String); let bw = BufferedWriter.new(fw); call bw.write($String);
       call bw.flush(); call bw.close() }
     catch (e: IOException) { call e.printStackTrace() }",
    "let f = File.new($String); let sc = Scanner.new(f);
     while (let b = sc.hasNextLine(): b) do { call sc.nextLine() }; call sc.close()",
    "try { let f = File.new($String); let fis = FileInputStream.new(f);
       while (let n = fis.read(): n) do { skip }; call fis.close() }
     catch (e: FileNotFoundException) { call e.printStackTrace() }",
    "let f = File.new($String); let n = f.length();
     if (let b = f.exists(): b) then { call $Random.nextInt(n) }",
    "let fis = FileInputStream.new($File); let isr = InputStreamReader.new(fis);
     let br = BufferedReader.new(isr); call br.readLine(); call br.close()",
    "try { let fr = FileReader.new($File); call fr.close() } catch (e: IOException) { call e.getMessage() }",
    "let f = File.new($String); if (let b = f.mkdir(): b) then { call f.getName() } else { call f.delete() }",
    "try { let fr = FileReader.new($String); let br = BufferedReader.new(fr);
       if (let b = br.ready(): b) then { call br.readLine() }; call br.close() }
     catch (e: IOException) { call e.printStackTrace() }",
    "let sc = Scanner.new($File);
     while (let b = sc.hasNextLine(): b) do { let line = sc.nextLine(); call line.trim() }; call sc.close()",
    "let sc = Scanner.new($File); while (let b = sc.hasNextLine(): b) do { call sc.nextInt() }; call sc.close()",
    "try { let fos = FileOutputStream.new($File); call fos.write($int); call fos.flush(); call fos.close() }
     catch (e: FileNotFoundException) { call e.printStackTrace() }",
    "let fw = FileWriter.new($String); call fw.close()",
    // collections and strings
    "let list = ArrayList.new(); call list.add($String); let n = list.size(); call list.get(n)",
    "let list = ArrayList.new(); let it = list.iterator(); while (let b = it.hasNext(): b) do { call it.next() }",
    "let list = ArrayList.new(); if (let b = list.isEmpty(): b) then { call list.add($String) } else { call list.clear() }",
    "let map = HashMap.new(); call map.put($String, $String);
     if (let b = map.containsKey($String): b) then { call map.get($String) }",
    "let map = HashMap.new(); call map.put($String, $String); call map.remove($String)",
    "let sb = StringBuilder.new(); call sb.append($String); call sb.append($String); call sb.toString()",
    "let sb = StringBuilder.new(); call sb.append($String); call sb.reverse(); call sb.length()",
    "let r = Random.new(); if (let b = r.nextBoolean(): b) then { call r.nextInt($int) }",
    "let r = Random.new(); let list = ArrayList.new();
     while (let b = r.nextBoolean(): b) do { call list.add($String) }; call list.size()",
    "let sc = Scanner.new($File); let line = sc.nextLine();
     if (let b = line.isEmpty(): b) then { skip } else { call line.toUpperCase() }; call sc.close()",
    "let map = HashMap.new(); let it = $ArrayList.iterator();
     while (let b = it.hasNext(): b) do { let k = it.next(); call map.put(k, k) }",
    "let list = ArrayList.new(); let sc = Scanner.new($File);
     while (let b = sc.hasNextLine(): b) do { let line = sc.nextLine(); call list.add(line) }; call sc.close()",
    "let sb = StringBuilder.new(); let it = $ArrayList.iterator();
     while (let b = it.hasNext(): b) do { let s = it.next(); call sb.append(s) }; call sb.toString()",
    "if (let b = $HashMap.containsKey($String): b) then { call $HashMap.remove($String) }
     else { call $HashMap.put($String, $String) }",
    "let list = ArrayList.new(); call list.add($String); call list.clear()",
    "if (let b = $String.contains($String): b) then { call $String.toUpperCase() } else { call $String.trim() }",
    "let sb = StringBuilder.new(); while (let b = $Random.nextBoolean(): b) do { call sb.append($String) };
     call sb.reverse()",
    // networking
    "try { let url = URL.new($String); let conn = url.openConnection(); call conn.connect();
       let is = conn.getInputStream(); call is.read(); call is.close() }
     catch (e: MalformedURLException) { call e.printStackTrace() }
     catch (e: IOException) { call e.getMessage() }",
    "try { let url = URL.new($String); let is = url.openStream(); let isr = InputStreamReader.new(is);
       let br = BufferedReader.new(isr); call br.readLine(); call br.close() }
     catch (e: IOException) { call e.printStackTrace() }",
    "try { let sock = Socket.new($String, $int); let os = sock.getOutputStream(); call os.write($int);
       call os.flush(); call sock.close() }
     catch (e: UnknownHostException) { call e.printStackTrace() }",
    "try { let sock = Socket.new($String, $int);
       if (let b = sock.isConnected(): b) then { let is = sock.getInputStream(); call is.read() };
       call sock.close() }
     catch (e: IOException) { call e.printStackTrace() }",
    "let url = URL.new($String); call url.getHost()",
    "try { let url = URL.new($String); let conn = url.openConnection(); call conn.setDoOutput($boolean);
       let os = conn.getOutputStream(); call os.write($int); call os.close() }
     catch (e: IOException) { call e.printStackTrace() }",
    "try { let url = URL.new($String); let conn = url.openConnection(); call conn.getContentLength() }
     catch (e: MalformedURLException) { call e.getMessage() }",
    "try { let sock = Socket.new($String, $int); let is = sock.getInputStream();
       while (let n = is.read(): n) do { skip }; call sock.close() }
     catch (e: IOException) { skip }",
    // mixed
    "try { let fr = FileReader.new($String); let br = BufferedReader.new(fr); let list = ArrayList.new();
       while (let s = br.readLine(): s) do { call list.add($String) }; call br.close() }
     catch (e: IOException) { call e.printStackTrace() }",
    "let sb = StringBuilder.new();
     try { let sc = Scanner.new($File); while (let b = sc.hasNextLine(): b) do { call sb.append($String) };
       call sc.close() }
     catch (e: FileNotFoundException) { call e.printStackTrace() };
     call sb.toString()",
    "let map = HashMap.new();
     try { let url = URL.new($String); call url.getHost(); call map.put($String, $String) }
     catch (e: MalformedURLException) { skip }",
    "let f = File.new($String);
     if (let b = f.exists(): b) then { let sc = Scanner.new(f); call sc.nextLine(); call sc.close() }
     else { call f.mkdir() }",
    "let r = Random.new(); let sb = StringBuilder.new();
     if (let b = r.nextBoolean(): b) then { call sb.append($String) } else { call sb.reverse() };
     call sb.toString()",
    "try { let fw = FileWriter.new($File); let bw = BufferedWriter.new(fw); let it = $ArrayList.iterator();
       while (let b = it.hasNext(): b) do { call bw.write($String); call bw.newLine() }; call bw.close() }
     catch (e: IOException) { call e.printStackTrace() }",
    "try { let fis = FileInputStream.new($File); call fis.available(); call fis.close() }
     catch (e: FileNotFoundException) { call e.getMessage() }
     catch (e: IOException) { call e.printStackTrace() }",
    "let sock = Socket.new($String, $int);
     try { let is = sock.getInputStream(); let isr = InputStreamReader.new(is);
       let br = BufferedReader.new(isr); call br.readLine() }
     catch (e: IOException) { call e.printStackTrace() };
     call sock.close()",
    "let f = File.new($String); let fr = FileReader.new(f); let br = BufferedReader.new(fr);
     if (let b = br.ready(): b) then { call br.readLine() }; call br.close()",
    "let map = HashMap.new(); let sc = Scanner.new($File);
     while (let b = sc.hasNextLine(): b) do { let line = sc.nextLine(); call map.put(line, line) };
     call sc.close()",
];

/// Run configuration under which a model overfits the toy corpus within
/// the default 50 epochs.
pub const CONFIG_TOML: &str = r#"seed = 0

[model]
lr = 0.01
batch = 2
"#;

pub fn run_config() -> RunConfig {
    RunConfig::from_toml(CONFIG_TOML).expect("toy config is valid")
}

/// Corpus records of the toy programs, labels left for extraction.
pub fn corpus_records() -> Vec<CorpusRecord> {
    PROGRAMS
        .iter()
        .map(|p| CorpusRecord { program: p.split_whitespace().collect::<Vec<_>>().join(" "), label: None })
        .collect()
}

pub fn database() -> ApiDatabase {
    ApiDatabase::from_yaml(API_YAML).expect("toy database is valid")
}

pub fn programs() -> Vec<Program> {
    PROGRAMS.iter().map(|t| parse_program(t).expect("toy program parses")).collect()
}

/// Label and sketch of every toy program.
pub fn corpus() -> Vec<(Label, Sketch)> {
    let db = database();
    programs()
        .iter()
        .map(|p| {
            (extract_label(p, &db).expect("toy program types"), abstract_program(p, &db).expect("toy program types"))
        })
        .collect()
}
