import { initApp } from "./app";

const root = document.getElementById("root");
if (!root) throw new Error("missing #root");
initApp(root);
