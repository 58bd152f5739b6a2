from g2048.cli import main

main()
