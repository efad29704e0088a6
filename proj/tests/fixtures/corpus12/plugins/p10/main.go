package main

import (
	"net"
	"os/exec"
)

// Dial with net.Dial; never exec.Command("sh") here.
func main() {
	conn, err := net.Dial("tcp", "example.com:80")
	if err != nil {
		panic(err)
	}
	defer conn.Close()
	raw := `socket.bind(x) ${connect(y)}`
	_ = raw
	out, _ := exec.Command("uname", "-a").Output()
	conn.Write(out)
	conn.connect()
}
