import init, {
  synthFingerprint, binarize, thinLayers, thinningProfile, blockFactorTable,
} from './pkg/ridgeline_wasm.js';

const $ = (id) => document.getElementById(id);
const SIZE = 512;
let image = null; // { pixels: Uint8Array, width, height }

function params() {
  return {
    block: Number($('block').value),
    overlap: Number($('overlap').value),
    light: $('polarity').value === 'light',
    iterations: Number($('iterations').value),
  };
}

function paint(canvas, width, height, shade) {
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext('2d');
  const data = ctx.createImageData(width, height);
  for (let i = 0; i < width * height; i++) {
    const v = shade(i);
    data.data.set([v, v, v, 255], 4 * i);
  }
  ctx.putImageData(data, 0, 0);
}

function drawProfile(profile) {
  const c = $('profile');
  const ctx = c.getContext('2d');
  ctx.clearRect(0, 0, c.width, c.height);
  const bw = c.width / profile.length;
  const h = c.height - 16;
  ctx.font = '10px system-ui';
  profile.forEach((v, i) => {
    ctx.fillStyle = i < 6 ? '#357' : '#b55';
    ctx.fillRect(i * bw + 2, h - v * h, bw - 4, v * h);
    ctx.fillStyle = '#333';
    ctx.fillText(String(i + 1), i * bw + bw / 2 - 3, c.height - 3);
  });
}

function drawFactors(table) {
  const rows = (table.length - 2) / 4;
  const [selMul, selDiv] = table.slice(-2);
  const body = $('factors').tBodies[0];
  body.innerHTML = '';
  for (let r = 0; r < rows; r++) {
    const [n, s2, mul, div] = table.slice(4 * r, 4 * r + 4);
    const tr = body.insertRow();
    if (n === selMul) tr.className = 'sel';
    for (const v of [n, s2.toFixed(2), mul.toFixed(2), div.toFixed(2)]) tr.insertCell().textContent = v;
  }
  $('selected').textContent = `largest factor: N = ${selMul} (multiply), N = ${selDiv} (divide)`;
}

function refreshThinning() {
  if (!image) return;
  const { pixels, width, height } = image;
  const p = params();
  const layers = thinLayers(pixels, width, height, p.block, p.overlap, p.light, p.iterations);
  paint($('thin'), width, height, (i) => [255, 180, 0][layers[i]]);
}

function refresh() {
  if (!image) return;
  $('status').textContent = '';
  try {
    const { pixels, width, height } = image;
    const p = params();
    const bits = binarize(pixels, width, height, p.block, p.overlap, p.light);
    paint($('binary'), width, height, (i) => (bits[i] ? 0 : 255));
    refreshThinning();
    drawProfile(thinningProfile(pixels, width, height, p.block, p.overlap, p.light, 10));
  } catch (e) {
    $('status').textContent = String(e.message ?? e);
  }
}

function setImage(pixels, width, height) {
  image = { pixels, width, height };
  paint($('gray'), width, height, (i) => pixels[i]);
  try {
    drawFactors(blockFactorTable(pixels, width, height));
  } catch (e) {
    $('status').textContent = String(e.message ?? e);
  }
  refresh();
}

function parsePgm(buf) {
  const bytes = new Uint8Array(buf);
  let pos = 0;
  const token = () => {
    for (;;) {
      while (pos < bytes.length && /\s/.test(String.fromCharCode(bytes[pos]))) pos++;
      if (bytes[pos] !== 35) break; // '#'
      while (pos < bytes.length && bytes[pos] !== 10) pos++;
    }
    const start = pos;
    while (pos < bytes.length && !/\s/.test(String.fromCharCode(bytes[pos]))) pos++;
    return new TextDecoder().decode(bytes.subarray(start, pos));
  };
  if (token() !== 'P5') throw new Error('only binary PGM (P5) is supported');
  const width = Number(token()), height = Number(token()), maxval = Number(token());
  if (!(maxval > 0 && maxval <= 255)) throw new Error(`unsupported maxval ${maxval}`);
  const pixels = bytes.slice(pos + 1, pos + 1 + width * height);
  if (pixels.length !== width * height) throw new Error('truncated PGM');
  return { pixels, width, height };
}

async function openFile(file) {
  if (file.name.toLowerCase().endsWith('.pgm')) {
    const { pixels, width, height } = parsePgm(await file.arrayBuffer());
    return setImage(pixels, width, height);
  }
  const bitmap = await createImageBitmap(file);
  const c = new OffscreenCanvas(bitmap.width, bitmap.height);
  const ctx = c.getContext('2d');
  ctx.drawImage(bitmap, 0, 0);
  const rgba = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  const gray = new Uint8Array(bitmap.width * bitmap.height);
  for (let i = 0; i < gray.length; i++) {
    gray[i] = Math.round(0.299 * rgba[4 * i] + 0.587 * rgba[4 * i + 1] + 0.114 * rgba[4 * i + 2]);
  }
  setImage(gray, bitmap.width, bitmap.height);
}

await init();
$('generate').onclick = () => setImage(synthFingerprint(SIZE, SIZE, Number($('seed').value)), SIZE, SIZE);
$('file').onchange = (e) => e.target.files[0] && openFile(e.target.files[0]).catch((err) => { $('status').textContent = err.message; });
for (const id of ['block', 'polarity']) $(id).onchange = refresh;
$('overlap').oninput = () => { $('overlapv').textContent = $('overlap').value; refresh(); };
$('iterations').oninput = () => { $('iterationsv').textContent = $('iterations').value; refreshThinning(); };
$('generate').click();
